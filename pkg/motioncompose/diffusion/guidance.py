# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from motioncompose.denoiser.energy_attention import AgdConfig
from motioncompose.denoiser.model import Denoiser
from motioncompose.utils.errors import InvalidInputError


def guided_sum(uncond: np.ndarray, weighted_deltas: Sequence[Tuple[float, np.ndarray, np.ndarray]]) -> np.ndarray:
    """uncond + Σ w (a − b) accumulated in order; shared by every guidance form so their results agree bitwise."""
    out = uncond
    for weight, a, b in weighted_deltas:
        out = out + weight * (a - b)
    return out


def cfg_score(
    denoiser: Denoiser, z_t: np.ndarray, t: int, c: np.ndarray, w: float, agd: Optional[AgdConfig] = None, **kwargs,
) -> np.ndarray:
    """ε(z_t, t) + w (ε(z_t, t, c) − ε(z_t, t)). AGD, when given, refines the conditional branch only."""
    if not w >= 0:
        raise InvalidInputError(f"Guidance weight should be non-negative but {w} was given")
    uncond = denoiser.predict_eps(z_t, t, denoiser.embedder.null(), **kwargs)
    cond = denoiser.predict_eps(z_t, t, c, agd=agd, **kwargs)
    return guided_sum(uncond, [(w, cond, uncond)])


def make_cfg_score_fn(
    denoiser: Denoiser, c: np.ndarray, w: float, agd: Optional[AgdConfig] = None, **kwargs,
) -> Callable[[np.ndarray, int], np.ndarray]:
    return lambda z_t, t: cfg_score(denoiser, z_t, t, c, w, agd=agd, **kwargs)
