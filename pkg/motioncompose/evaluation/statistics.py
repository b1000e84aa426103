# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from motioncompose.numerics.rng import make_rng
from motioncompose.utils.errors import InvalidInputError


@dataclass
class ConfidenceInterval:
    estimate: float
    low: float
    high: float
    confidence: float

    def as_dict(self) -> dict:
        return {"estimate": self.estimate, "low": self.low, "high": self.high, "confidence": self.confidence}


def bootstrap_ci(
    values: np.ndarray, statistic: Callable[[np.ndarray], float] = np.mean, confidence: float = 0.95,
    n_resamples: int = 1000, seed: int = 0,
) -> ConfidenceInterval:
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        raise InvalidInputError("Bootstrap needs at least two values")
    result = stats.bootstrap(
        (values,), statistic, confidence_level=confidence, n_resamples=n_resamples, method="percentile",
        random_state=make_rng(seed, "bootstrap"), vectorized=False,
    )
    ci = result.confidence_interval
    return ConfidenceInterval(float(statistic(values)), float(ci.low), float(ci.high), confidence)


def bootstrap_diff_ci(
    a: np.ndarray, b: np.ndarray, confidence: float = 0.95, n_resamples: int = 1000, seed: int = 0,
) -> ConfidenceInterval:
    """Interval of mean(a) − mean(b) with both samples resampled independently."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise InvalidInputError("Bootstrap needs at least two values per sample")

    def mean_difference(x: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(x) - np.mean(y))

    result = stats.bootstrap(
        (a, b), mean_difference, confidence_level=confidence, n_resamples=n_resamples, method="percentile",
        random_state=make_rng(seed, "bootstrap", "diff"), vectorized=False, paired=False,
    )
    ci = result.confidence_interval
    return ConfidenceInterval(mean_difference(a, b), float(ci.low), float(ci.high), confidence)
