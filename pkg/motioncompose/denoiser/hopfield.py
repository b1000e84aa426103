# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

"""Modern Hopfield energy and its update rule.

Stored patterns are the columns of X (d × N); a state ξ has d entries. Several states can be given as the rows of
an (n, d) array, in which case energies and updates are computed row by row.
"""

from typing import Union

import numpy as np

from motioncompose.numerics.functional import logsumexp_rows, softmax_rows
from motioncompose.utils.errors import InvalidInputError, ShapeError


def _check(X: np.ndarray, xi: np.ndarray, alpha: float) -> None:
    if X.ndim != 2:
        raise ShapeError(f"Patterns should be a d × N matrix but shape {X.shape} was given")
    if xi.shape[-1] != X.shape[0]:
        raise ShapeError(f"State dim {xi.shape[-1]} does not match pattern dim {X.shape[0]}")
    if not alpha > 0:
        raise InvalidInputError(f"alpha should be positive but {alpha} was given")


def hopfield_energy(X: np.ndarray, xi: np.ndarray, alpha: float) -> Union[float, np.ndarray]:
    """E(ξ) = −α⁻¹ log Σ_i exp(α (Xᵀξ)_i) + ½ ξᵀξ."""
    X, xi = np.asarray(X, dtype=np.float64), np.asarray(xi, dtype=np.float64)
    _check(X, xi, alpha)
    energy = -logsumexp_rows(xi @ X, scale=alpha) / alpha + 0.5 * np.sum(xi * xi, axis=-1)
    return float(energy) if xi.ndim == 1 else energy


def hopfield_update(X: np.ndarray, xi: np.ndarray, gamma: float, alpha: float) -> np.ndarray:
    """ξ_new = ξ − γ (ξ − X softmax(α Xᵀ ξ)); with γ = 1 this is one retrieval step X softmax(α Xᵀ ξ)."""
    X, xi = np.asarray(X, dtype=np.float64), np.asarray(xi, dtype=np.float64)
    _check(X, xi, alpha)
    if not 0 < gamma <= 1:
        raise InvalidInputError(f"gamma should be in (0, 1] but {gamma} was given")

    retrieved = softmax_rows(xi @ X, scale=alpha) @ X.T
    if gamma == 1:
        return retrieved
    return xi - gamma * (xi - retrieved)
