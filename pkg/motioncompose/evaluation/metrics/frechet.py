# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Dict, List, Optional, Union

import numpy as np

from motioncompose.evaluation.common import MotionSample
from motioncompose.evaluation.metrics.base import SetMetric
from motioncompose.utils.errors import InvalidInputError


# Eigenvalues down to −EIGEN_TOLERANCE · max|λ| are treated as rounding noise and clipped to 0.
EIGEN_TOLERANCE: float = 1e-8


def _psd_eigenvalues(matrix: np.ndarray) -> tuple:
    values, vectors = np.linalg.eigh(0.5 * (matrix + matrix.T))
    scale = max(float(np.max(np.abs(values), initial=0.0)), 1.0)
    if np.any(values < -EIGEN_TOLERANCE * scale):
        raise InvalidInputError(f"Matrix is not positive semi-definite (min eigenvalue {values.min():.3e})")
    return np.clip(values, 0.0, None), vectors


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = _psd_eigenvalues(matrix)
    return (vectors * np.sqrt(values)) @ vectors.T


def frechet_from_moments(mu_a: np.ndarray, cov_a: np.ndarray, mu_b: np.ndarray, cov_b: np.ndarray) -> float:
    """‖μ_a − μ_b‖² + tr(Σ_a + Σ_b − 2 (Σ_a Σ_b)^½), with tr (Σ_a Σ_b)^½ = tr (Σ_a^½ Σ_b Σ_a^½)^½."""
    sqrt_a = psd_sqrt(cov_a)
    cross, _ = _psd_eigenvalues(sqrt_a @ cov_b @ sqrt_a)
    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.sum(np.sqrt(cross)))
    return max(value, 0.0)


def _moments(feats: np.ndarray, name: str):
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2:
        raise InvalidInputError(f"{name} should be a (count, dim) feature matrix but has shape {feats.shape}")
    if feats.shape[0] <= feats.shape[1]:
        raise InvalidInputError(f"{name} has {feats.shape[0]} samples, need more than the feature dim {feats.shape[1]}")
    if not np.all(np.isfinite(feats)):
        raise InvalidInputError(f"{name} contains non-finite features")
    cov = np.atleast_2d(np.cov(feats, rowvar=False))
    values = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    if values.min() <= EIGEN_TOLERANCE * float(np.max(np.abs(values))):
        raise InvalidInputError(
            f"{name} has a singular covariance (eigenvalues {values.min():.3e} .. {values.max():.3e}), "
            f"some feature directions do not vary across the set"
        )
    return feats.mean(axis=0), cov


def frechet_distance(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    mu_a, cov_a = _moments(feats_a, "feats_a")
    mu_b, cov_b = _moments(feats_b, "feats_b")
    if mu_a.shape != mu_b.shape:
        raise InvalidInputError(f"Feature dims differ: {mu_a.shape[0]} vs {mu_b.shape[0]}")
    return frechet_from_moments(mu_a, cov_a, mu_b, cov_b)


class FrechetDistance(SetMetric):
    """Fréchet distance between the round's generated features and a reference feature set."""
    name: str = "FID"
    lower_is_better: bool = True

    def __init__(
        self, num_rounds: int, num_data: int, main_logger=None,
        reference_features: Optional[Union[np.ndarray, Dict[str, np.ndarray]]] = None, **kwargs,
    ) -> None:
        super().__init__(num_rounds, num_data, main_logger, **kwargs)
        assert reference_features is not None, "FID needs `reference_features`"
        # One feature matrix for every round, or a mapping from round id to that round's reference set.
        self._reference_features: Union[np.ndarray, Dict[str, np.ndarray]] = reference_features

    def on_round_test_start(self, round_id: str) -> None:
        super().on_round_test_start(round_id)
        self._round_id: str = round_id

    def _scoring_set(self, samples: List[MotionSample]) -> float:
        reference = self._reference_features
        if isinstance(reference, dict):
            reference = reference[self._round_id]
        try:
            return frechet_distance(np.stack([sample.features for sample in samples]), reference)
        except InvalidInputError as e:
            # Degenerate rounds score NaN.
            if self._main_logger is not None:
                self._main_logger.warning(f"FID of {self._round_id} is undefined: {e}", tag=self.name)
            return float("nan")
