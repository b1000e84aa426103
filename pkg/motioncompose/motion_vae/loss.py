# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from motioncompose.motion_vae.model import GaussianPosterior
from motioncompose.utils.errors import ShapeError


DEFAULT_KL_WEIGHT: float = 1e-4


@dataclass
class VaeLoss:
    total: float
    reconstruction: float
    kl: float
    grad_recon: np.ndarray
    grad_mean: np.ndarray
    grad_log_variance: np.ndarray


def smooth_l1(diff: np.ndarray, beta: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Element-wise Huber-style smooth L1 and its derivative wrt `diff`."""
    abs_diff = np.abs(diff)
    quadratic = abs_diff < beta
    value = np.where(quadratic, 0.5 * diff * diff / beta, abs_diff - 0.5 * beta)
    grad = np.where(quadratic, diff / beta, np.sign(diff))
    return value, grad


def gaussian_kl(p: GaussianPosterior) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Element-wise KL(N(μ, σ²) ‖ N(0, 1)) = ½(μ² + σ² − log σ² − 1), with gradients wrt μ and log σ²."""
    variance = np.exp(p.log_variance)
    kl = 0.5 * (p.mean * p.mean + variance - p.log_variance - 1.0)
    return kl, p.mean, 0.5 * (variance - 1.0)


def vae_loss(
    target: np.ndarray, recon: np.ndarray, p: GaussianPosterior, kl_weight: float = DEFAULT_KL_WEIGHT,
    mask: Optional[np.ndarray] = None,
) -> VaeLoss:
    """Masked smooth-L1 mean over valid frames and channels + kl_weight · mean element KL.

    `mask` has the frame shape of `target` without the channel axis; padded frames contribute nothing, whatever
    their content.
    """
    if target.shape != recon.shape:
        raise ShapeError(f"Target {target.shape} and reconstruction {recon.shape} differ in shape")
    if mask is None:
        mask = np.ones(target.shape[:-1], dtype=bool)
    if mask.shape != target.shape[:-1]:
        raise ShapeError(f"Mask {mask.shape} does not match frames {target.shape}")

    valid = mask[..., None]
    count = max(1, int(mask.sum()) * target.shape[-1])
    diff = np.where(valid, recon - np.where(valid, target, 0.0), 0.0)
    value, grad = smooth_l1(diff)
    reconstruction = float(value.sum() / count)

    kl, grad_kl_mean, grad_kl_lv = gaussian_kl(p)
    kl_mean = float(kl.mean())

    return VaeLoss(
        total=reconstruction + kl_weight * kl_mean,
        reconstruction=reconstruction,
        kl=kl_mean,
        grad_recon=grad / count,
        grad_mean=kl_weight * grad_kl_mean / kl.size,
        grad_log_variance=kl_weight * grad_kl_lv / kl.size,
    )
