# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Union

import numpy as np

from motioncompose.evaluation.common import MotionSample
from motioncompose.evaluation.metrics.base import BaseMetric
from motioncompose.toymotion.common import MotionSequence, frame_differences
from motioncompose.utils.errors import InvalidInputError


def _frames(m: Union[MotionSequence, np.ndarray]) -> np.ndarray:
    return m.frames if isinstance(m, MotionSequence) else np.asarray(m)


def transition_distance(m: Union[MotionSequence, np.ndarray]) -> float:
    """Mean Euclidean distance between consecutive frames; angle channels are differenced on the circle."""
    frames = _frames(m)
    if frames.shape[0] < 2:
        raise InvalidInputError(f"transition_distance needs at least 2 frames but {frames.shape[0]} were given")
    return float(np.mean(np.linalg.norm(frame_differences(frames), axis=-1)))


def jerk_metric(m: Union[MotionSequence, np.ndarray]) -> float:
    """Mean norm of the second frame difference. Lower is smoother."""
    frames = _frames(m)
    if frames.shape[0] < 3:
        raise InvalidInputError(f"jerk_metric needs at least 3 frames but {frames.shape[0]} were given")
    second = np.diff(frame_differences(frames), axis=0)
    return float(np.mean(np.linalg.norm(second, axis=-1)))


class TransitionDistance(BaseMetric):
    name: str = "Transition"
    lower_is_better: bool = True

    def _scoring_sample(self, sample: MotionSample) -> float:
        return transition_distance(sample.motion)


class Jerk(BaseMetric):
    name: str = "Jerk"
    lower_is_better: bool = True

    def _scoring_sample(self, sample: MotionSample) -> float:
        return jerk_metric(sample.motion)
