# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Tuple, Union

from motioncompose.evaluation.common import MotionSample
from motioncompose.evaluation.metrics.base import BaseMetric
from motioncompose.toymotion.classifier import PRESENT_THRESHOLD, concept_classifier, description_present
from motioncompose.toymotion.common import ConceptDescription, MotionSequence
from motioncompose.utils.errors import InvalidInputError


@dataclass
class RecallReport:
    hit_rate: float
    count: int
    # Fraction of tokens of each family judged present.
    per_family: Dict[str, float]
    # Hit rate by number of tokens in the description.
    per_token_count: Dict[int, float]

    def as_dict(self) -> dict:
        return {
            "hit_rate": self.hit_rate, "count": self.count, "per_family": self.per_family,
            "per_token_count": {str(k): v for k, v in self.per_token_count.items()},
        }


def concept_recall(samples: List[Tuple[MotionSequence, ConceptDescription]]) -> RecallReport:
    """A sample hits when the oracle finds every token of its description; empty descriptions hit vacuously."""
    if len(samples) == 0:
        raise InvalidInputError("concept_recall needs at least one sample")

    hits = 0
    family_counts: Dict[str, List[int]] = defaultdict(lambda: [0, 0])
    k_counts: Dict[int, List[int]] = defaultdict(lambda: [0, 0])
    for m, desc in samples:
        present = [concept_classifier(m, token) >= PRESENT_THRESHOLD for token in desc.tokens]
        for token, found in zip(desc.tokens, present):
            family_counts[token.family.value][0] += int(found)
            family_counts[token.family.value][1] += 1
        hit = all(present)
        hits += int(hit)
        k_counts[len(desc)][0] += int(hit)
        k_counts[len(desc)][1] += 1

    return RecallReport(
        hit_rate=hits / len(samples),
        count=len(samples),
        per_family={family: found / total for family, (found, total) in sorted(family_counts.items())},
        per_token_count={k: found / total for k, (found, total) in sorted(k_counts.items())},
    )


class ConceptRecall(BaseMetric):
    name: str = "ConceptRecall"

    def _scoring_sample(self, sample: MotionSample) -> Union[float, int]:
        return int(description_present(sample.motion, sample.description))

    def _easy_reading_score_format(self, score: float) -> str:
        return f"{score:.2%}"
