# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from motioncompose.evaluation.metrics.base import BaseMetric, SetMetric
from motioncompose.evaluation.metrics.concept_recall import ConceptRecall, RecallReport, concept_recall
from motioncompose.evaluation.metrics.diversity import Diversity, Multimodality, diversity, multimodality
from motioncompose.evaluation.metrics.frechet import FrechetDistance, frechet_distance, frechet_from_moments
from motioncompose.evaluation.metrics.mm_distance import MMDistance, mm_distance
from motioncompose.evaluation.metrics.smoothness import Jerk, TransitionDistance, jerk_metric, transition_distance


__all__ = [
    "BaseMetric", "ConceptRecall", "Diversity", "FrechetDistance", "Jerk", "MMDistance", "Multimodality",
    "RecallReport", "SetMetric", "TransitionDistance", "concept_recall", "diversity", "frechet_distance",
    "frechet_from_moments", "jerk_metric", "mm_distance", "multimodality", "transition_distance",
]
