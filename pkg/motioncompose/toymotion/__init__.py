# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from motioncompose.toymotion.classifier import concept_classifier, description_present, description_scores
from motioncompose.toymotion.common import (
    ConceptDescription, ConceptFamily, ConceptToken, MotionSequence, FAMILY_MODES, MAX_LENGTH, MIN_LENGTH,
    MOTION_DIM, VOCABULARY,
)
from motioncompose.toymotion.dataset import (
    DatasetConfig, MotionRecord, make_dataset, read_dataset, sample_description, write_dataset,
)
from motioncompose.toymotion.synthesizer import synthesize_motion


__all__ = [
    "ConceptDescription", "ConceptFamily", "ConceptToken", "DatasetConfig", "FAMILY_MODES", "MAX_LENGTH",
    "MIN_LENGTH", "MOTION_DIM", "MotionRecord", "MotionSequence", "VOCABULARY", "concept_classifier",
    "description_present", "description_scores", "make_dataset", "read_dataset", "sample_description",
    "synthesize_motion", "write_dataset",
]
