# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from motioncompose.diffusion.schedule import NoiseSchedule
from motioncompose.numerics.rng import make_rng
from motioncompose.utils.errors import InvalidInputError, SamplingFailureError


# score_fn(x_t, i) -> ε̂ with the shape of x_t, for step index i ∈ [0, T).
ScoreFn = Callable[[np.ndarray, int], np.ndarray]
# on_step(i, x_{t-1}) is called after every reverse step.
StepCallback = Callable[[int, np.ndarray], None]


class SamplerKind(Enum):
    ancestral = "ancestral"
    deterministic = "deterministic-subsequence"


@dataclass
class SamplerConfig:
    substrate: str = "latent"
    steps: int = 50
    guidance_weight: float = 5.0
    sampler: SamplerKind = SamplerKind.deterministic
    seed: int = 0

    def __post_init__(self) -> None:
        self.sampler = SamplerKind(self.sampler)
        if self.substrate not in ("latent", "sequence"):
            raise InvalidInputError(f"Unknown substrate {self.substrate}")
        if self.steps < 1:
            raise InvalidInputError(f"steps should be positive but {self.steps} was given")
        if not (np.isfinite(self.guidance_weight) and self.guidance_weight >= 0):
            raise InvalidInputError(f"guidance_weight should be finite and non-negative but {self.guidance_weight} was given")


def timestep_subsequence(T: int, steps: int) -> np.ndarray:
    """Evenly spaced step indices in [0, T), descending; all T indices when steps == T."""
    if not 1 <= steps <= T:
        raise InvalidInputError(f"steps should be in [1, {T}] but {steps} was given")
    if steps == T:
        return np.arange(T - 1, -1, -1)
    return np.unique(np.round(np.linspace(0, T - 1, steps)).astype(np.int64))[::-1]


def _alpha_bars(schedule: NoiseSchedule, i: int, i_prev: int) -> Tuple[float, float]:
    return float(schedule.alpha_bars[i]), 1.0 if i_prev < 0 else float(schedule.alpha_bars[i_prev])


def ancestral_step(
    x_t: np.ndarray, eps: np.ndarray, i: int, i_prev: int, schedule: NoiseSchedule, noise: Optional[np.ndarray],
) -> np.ndarray:
    """Posterior step x_t -> x_{i_prev}: mean (x_t − β/√(1−ᾱ) ε̂)/√α plus √β̃ noise, β taken between the two steps."""
    alpha_bar, alpha_bar_prev = _alpha_bars(schedule, i, i_prev)
    if i_prev == i - 1:
        beta = float(schedule.betas[i])
        variance = float(schedule.posterior_variances[i])
    else:
        beta = 1.0 - alpha_bar / alpha_bar_prev
        variance = (1.0 - alpha_bar_prev) / (1.0 - alpha_bar) * beta

    mean = (x_t - beta / np.sqrt(1.0 - alpha_bar) * eps) / np.sqrt(1.0 - beta)
    if noise is None or i_prev < 0:
        return mean
    return mean + np.sqrt(variance) * noise


def deterministic_step(x_t: np.ndarray, eps: np.ndarray, i: int, i_prev: int, schedule: NoiseSchedule) -> np.ndarray:
    """Variance-free step through the predicted x_0."""
    alpha_bar, alpha_bar_prev = _alpha_bars(schedule, i, i_prev)
    x0 = (x_t - np.sqrt(1.0 - alpha_bar) * eps) / np.sqrt(alpha_bar)
    return np.sqrt(alpha_bar_prev) * x0 + np.sqrt(1.0 - alpha_bar_prev) * eps


def langevin_step(
    x_t: np.ndarray, eps: np.ndarray, i: int, schedule: NoiseSchedule, noise: Optional[np.ndarray] = None,
    eta: float = 1.0,
) -> np.ndarray:
    """Energy-descent view of one reverse step: x_t − η ∇E + √β̃ noise, with ∇E read as β/√(1−ᾱ) ε̂.

    Differs from the posterior step by O(β) per step.
    """
    grad_energy = float(schedule.betas[i]) / np.sqrt(1.0 - float(schedule.alpha_bars[i])) * eps
    out = x_t - eta * grad_energy
    if noise is not None:
        out = out + np.sqrt(float(schedule.posterior_variances[i])) * noise
    return out


def sample(
    score_fn: ScoreFn, cfg: SamplerConfig, schedule: NoiseSchedule, shape: Tuple[int, ...],
    on_step: Optional[StepCallback] = None, x_T: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Run the reverse process from x_T ~ N(0, I) (drawn from cfg.seed unless given)."""
    indices = timestep_subsequence(schedule.T, cfg.steps)
    rng = make_rng(cfg.seed, "sampler")
    x = rng.standard_normal(shape) if x_T is None else np.array(x_T, dtype=np.float64)

    for pos, i in enumerate(indices):
        i = int(i)
        i_prev = int(indices[pos + 1]) if pos + 1 < len(indices) else -1
        eps = np.asarray(score_fn(x, i))
        if eps.shape != x.shape or not np.all(np.isfinite(eps)):
            raise SamplingFailureError(f"Score function returned an invalid prediction {eps.shape}", step=i)

        if cfg.sampler == SamplerKind.ancestral:
            noise = rng.standard_normal(shape) if i_prev >= 0 else None
            x = ancestral_step(x, eps, i, i_prev, schedule, noise)
        else:
            x = deterministic_step(x, eps, i, i_prev, schedule)

        if not np.all(np.isfinite(x)):
            raise SamplingFailureError("Sampling state became non-finite", step=i)
        if on_step is not None:
            on_step(i, x)
    return x
