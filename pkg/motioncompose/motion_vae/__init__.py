# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from motioncompose.motion_vae.loss import VaeLoss, gaussian_kl, smooth_l1, vae_loss
from motioncompose.motion_vae.model import GaussianPosterior, MotionVAE, reparameterize
from motioncompose.motion_vae.trainer import VaeTrainConfig, reconstruction_report, train_vae


__all__ = [
    "GaussianPosterior", "MotionVAE", "VaeLoss", "VaeTrainConfig", "gaussian_kl", "reconstruction_report",
    "reparameterize", "smooth_l1", "train_vae", "vae_loss",
]
