# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from motioncompose.numerics.param_store import ParamStore
from motioncompose.numerics.rng import make_rng
from motioncompose.utils.errors import InvalidInputError


# A differentiable op under test: evaluates the scalar loss from the current values in the store, and when
# `with_grad` is True also accumulates analytic gradients into the (zeroed) store.
LossFn = Callable[[bool], float]


def _checked_loss(loss_fn: LossFn, with_grad: bool) -> float:
    loss = float(loss_fn(with_grad))
    if not np.isfinite(loss):
        raise InvalidInputError(f"Non-finite loss during gradient check: {loss}")
    return loss


def grad_check(
    loss_fn: LossFn, store: ParamStore, names: Optional[List[str]] = None, eps: float = 1e-5,
    max_entries: Optional[int] = 64, seed: int = 0,
) -> Tuple[float, Dict[str, float]]:
    """Compare analytic gradients against central differences.

    Returns the max over checked entries of |analytic - numeric| / max(1, |numeric|), and the same maximum per
    parameter. At most `max_entries` entries (seeded choice) are perturbed per parameter when set.
    """
    if not 0 < eps <= 1e-2:
        raise InvalidInputError(f"eps should be in (0, 1e-2] but {eps} was given")

    names = store.names() if names is None else names
    store.zero_grad()
    _checked_loss(loss_fn, True)
    analytic = {name: store.grad(name).copy() for name in names}

    per_param: Dict[str, float] = {}
    for name in names:
        value = store[name]
        flat_size = value.size
        indices = np.arange(flat_size)
        if max_entries is not None and flat_size > max_entries:
            indices = make_rng(seed, "grad_check", name).choice(flat_size, size=max_entries, replace=False)

        worst = 0.0
        for flat_idx in indices:
            idx = np.unravel_index(flat_idx, value.shape)
            original = value[idx]

            value[idx] = original + eps
            loss_plus = _checked_loss(loss_fn, False)
            value[idx] = original - eps
            loss_minus = _checked_loss(loss_fn, False)
            value[idx] = original

            numeric = (loss_plus - loss_minus) / (2 * eps)
            error = abs(analytic[name][idx] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, error)
        per_param[name] = worst

    store.zero_grad()
    return max(per_param.values(), default=0.0), per_param


def numeric_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        original = x[idx]
        x[idx] = original + eps
        plus = fn(x)
        x[idx] = original - eps
        minus = fn(x)
        x[idx] = original
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric)), initial=0.0))
