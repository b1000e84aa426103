# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from motioncompose.evaluation.features import motion_features
from motioncompose.toymotion.common import ConceptDescription, MotionSequence


@dataclass
class MotionSample:
    """One generated motion with the description it was generated from."""
    motion: MotionSequence
    description: ConceptDescription
    # Samples drawn for the same description share a group (used by multimodality).
    group: Optional[str] = None
    seed: Optional[int] = None
    metric_scores: Dict[str, float] = field(default_factory=lambda: {})

    def __post_init__(self) -> None:
        if self.group is None:
            self.group = self.description.to_text()
        self._features: Optional[np.ndarray] = None

    @property
    def features(self) -> np.ndarray:
        if self._features is None:
            self._features = motion_features(self.motion)
        return self._features

    def as_dict(self) -> dict:
        return {
            "description": self.description.to_text(),
            "group": self.group,
            "seed": self.seed,
            "length": self.motion.length,
            "metric_scores": self.metric_scores,
        }
