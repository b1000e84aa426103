# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from motioncompose.diffusion.guidance import cfg_score, guided_sum, make_cfg_score_fn
from motioncompose.diffusion.sampler import (
    SamplerConfig, SamplerKind, ScoreFn, ancestral_step, deterministic_step, langevin_step, sample,
    timestep_subsequence,
)
from motioncompose.diffusion.schedule import NoiseSchedule, make_schedule, q_sample
from motioncompose.diffusion.trainer import (
    DiffusionExamples, DiffusionTrainConfig, eps_mse, finetune, train_diffusion, training_step,
)


__all__ = [
    "DiffusionExamples", "DiffusionTrainConfig", "NoiseSchedule", "SamplerConfig", "SamplerKind", "ScoreFn",
    "ancestral_step", "cfg_score", "deterministic_step", "eps_mse", "finetune", "guided_sum", "langevin_step",
    "make_cfg_score_fn", "make_schedule", "q_sample", "sample", "timestep_subsequence", "train_diffusion",
    "training_step",
]
