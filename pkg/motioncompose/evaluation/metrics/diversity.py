# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from collections import defaultdict
from typing import Callable, Dict, List, Tuple

import numpy as np

from motioncompose.evaluation.common import MotionSample
from motioncompose.evaluation.features import feature_matrix
from motioncompose.evaluation.metrics.base import SetMetric
from motioncompose.numerics.rng import make_rng
from motioncompose.toymotion.common import ConceptDescription, MotionSequence
from motioncompose.utils.errors import InvalidInputError


DEFAULT_PAIRS: int = 300
DEFAULT_DRAWS: int = 30
DEFAULT_SUBSET: int = 10


def canonical_order(feats: np.ndarray) -> np.ndarray:
    """Lexicographic row order, so pairings depend on the set of samples and not on their order."""
    return feats[np.lexsort(feats.T[::-1])]


def diversity_pairs(count: int, pairs: int, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """`pairs` distinct unordered index pairs (i < j) out of `count` items."""
    if count < 2:
        raise InvalidInputError(f"Diversity needs at least 2 samples but {count} were given")
    rows, cols = np.triu_indices(count, k=1)
    if pairs > len(rows):
        raise InvalidInputError(f"{pairs} pairs requested but only {len(rows)} are available")
    chosen = np.sort(make_rng(seed, "diversity").choice(len(rows), size=pairs, replace=False))
    return rows[chosen], cols[chosen]


def diversity(feats: np.ndarray, pairs: int = DEFAULT_PAIRS, seed: int = 0) -> float:
    """Mean Euclidean feature distance over seeded random pairs of samples."""
    feats = canonical_order(np.asarray(feats, dtype=np.float64))
    first, second = diversity_pairs(len(feats), pairs, seed)
    return float(np.mean(np.linalg.norm(feats[first] - feats[second], axis=-1)))


def subset_pairs(count: int, subset: int, seed: int, group: str) -> Tuple[np.ndarray, np.ndarray]:
    """Two disjoint random subsets of size min(subset, count // 2), paired position by position."""
    size = min(subset, count // 2)
    chosen = make_rng(seed, "multimodality", group).choice(count, size=2 * size, replace=False)
    return chosen[:size], chosen[size:]


def multimodality_from_groups(groups: Dict[str, np.ndarray], subset: int = DEFAULT_SUBSET, seed: int = 0) -> float:
    """Mean within-group distance between two random subsets, averaged over groups (each with ≥ 2 samples)."""
    distances = []
    for group, feats in sorted(groups.items()):
        if len(feats) < 2:
            raise InvalidInputError(f"Group {group} has {len(feats)} samples, need at least 2")
        feats = canonical_order(np.asarray(feats, dtype=np.float64))
        first, second = subset_pairs(len(feats), subset, seed, group)
        distances.append(float(np.mean(np.linalg.norm(feats[first] - feats[second], axis=-1))))
    if len(distances) == 0:
        raise InvalidInputError("Multimodality needs at least one group")
    return float(np.mean(distances))


def multimodality(
    generate: Callable[[ConceptDescription, int, int], List[MotionSequence]], descriptions: List[ConceptDescription],
    draws_per_desc: int = DEFAULT_DRAWS, subset: int = DEFAULT_SUBSET, seed: int = 0,
) -> float:
    """`generate(desc, count, seed)` draws motions for one description."""
    if draws_per_desc < 2:
        raise InvalidInputError(f"draws_per_desc should be at least 2 but {draws_per_desc} was given")
    groups = {
        desc.to_text(): feature_matrix(generate(desc, draws_per_desc, seed + idx))
        for idx, desc in enumerate(descriptions)
    }
    return multimodality_from_groups(groups, subset, seed)


class Diversity(SetMetric):
    name: str = "Diversity"

    def __init__(self, num_rounds: int, num_data: int, main_logger=None, diversity_pairs: int = DEFAULT_PAIRS,
                 seed: int = 0, **kwargs) -> None:
        super().__init__(num_rounds, num_data, main_logger, **kwargs)
        self._pairs: int = diversity_pairs
        self._seed: int = seed

    def _scoring_set(self, samples: List[MotionSample]) -> float:
        available = len(samples) * (len(samples) - 1) // 2
        return diversity(np.stack([s.features for s in samples]), min(self._pairs, available), self._seed)


class Multimodality(SetMetric):
    name: str = "MModality"

    def __init__(self, num_rounds: int, num_data: int, main_logger=None, multimodality_subset: int = DEFAULT_SUBSET,
                 seed: int = 0, **kwargs) -> None:
        super().__init__(num_rounds, num_data, main_logger, **kwargs)
        self._subset: int = multimodality_subset
        self._seed: int = seed

    def _scoring_set(self, samples: List[MotionSample]) -> float:
        groups: Dict[str, list] = defaultdict(list)
        for sample in samples:
            groups[sample.group].append(sample.features)
        return multimodality_from_groups({k: np.stack(v) for k, v in groups.items() if len(v) >= 2}, self._subset, self._seed)
