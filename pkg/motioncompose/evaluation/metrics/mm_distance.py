# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import numpy as np

from motioncompose.evaluation.common import MotionSample
from motioncompose.evaluation.features import motion_features
from motioncompose.evaluation.metrics.base import BaseMetric
from motioncompose.toymotion.common import ConceptDescription, MotionSequence
from motioncompose.toymotion.synthesizer import synthesize_motion


def mm_distance(m: MotionSequence, desc: ConceptDescription) -> float:
    """Feature distance between a motion and the noise-free ground truth of its description at the same length."""
    reference = synthesize_motion(desc, m.length, noise_level=0.0, frame_rate=m.frame_rate)
    return float(np.linalg.norm(motion_features(m) - motion_features(reference)))


class MMDistance(BaseMetric):
    name: str = "MMDist"
    lower_is_better: bool = True

    def _scoring_sample(self, sample: MotionSample) -> float:
        return mm_distance(sample.motion, sample.description)
