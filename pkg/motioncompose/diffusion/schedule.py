# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from dataclasses import dataclass

import numpy as np

from motioncompose.utils.errors import InvalidInputError, ShapeError


SCHEDULE_KINDS = ("linear", "scaled-linear")


@dataclass(frozen=True)
class NoiseSchedule:
    """Arrays are indexed by step index i = t − 1, i.e. betas[0] is β_1."""
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    posterior_variances: np.ndarray

    @property
    def T(self) -> int:
        return len(self.betas)

    def alpha_bar_prev(self, i: int) -> float:
        return 1.0 if i == 0 else float(self.alpha_bars[i - 1])


def make_schedule(T: int = 1000, kind: str = "linear", beta_min: float = 1e-4, beta_max: float = 0.02) -> NoiseSchedule:
    if T < 1:
        raise InvalidInputError(f"T should be positive but {T} was given")
    if not 0 < beta_min < beta_max < 1:
        raise InvalidInputError(f"Need 0 < beta_min < beta_max < 1 but got ({beta_min}, {beta_max})")

    if kind == "linear":
        betas = np.linspace(beta_min, beta_max, T, dtype=np.float64)
    elif kind == "scaled-linear":
        betas = np.linspace(beta_min ** 0.5, beta_max ** 0.5, T, dtype=np.float64) ** 2
    else:
        raise InvalidInputError(f"Unknown schedule kind {kind}, choose from {SCHEDULE_KINDS}")

    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    alpha_bars_prev = np.concatenate([[1.0], alpha_bars[:-1]])
    posterior_variances = (1.0 - alpha_bars_prev) / (1.0 - alpha_bars) * betas
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=alpha_bars, posterior_variances=posterior_variances)


def q_sample(z0: np.ndarray, t: int, noise: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """z_t = √ᾱ_t z0 + √(1 − ᾱ_t) noise for t ∈ [1, T]; `t` may also be an array of per-row steps."""
    z0, noise = np.asarray(z0), np.asarray(noise)
    if z0.shape != noise.shape:
        raise ShapeError(f"Noise {noise.shape} does not match z0 {z0.shape}")
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > schedule.T):
        raise InvalidInputError(f"t should be in [1, {schedule.T}] but {t} was given")

    alpha_bar = schedule.alpha_bars[t - 1]
    alpha_bar = alpha_bar.reshape(alpha_bar.shape + (1,) * (z0.ndim - alpha_bar.ndim))
    return np.sqrt(alpha_bar) * z0 + np.sqrt(1.0 - alpha_bar) * noise
