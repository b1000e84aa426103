# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from abc import abstractmethod
from typing import List, Tuple, Union

import numpy as np

from motioncompose.evaluation.common import MotionSample
from motioncompose.utils.logger import Logger


class BaseMetric:
    """Per-sample metric averaged over a round."""
    name: str = "Base"
    # Lower values are better (reported for readability only).
    lower_is_better: bool = False

    def __init__(self, num_rounds: int, num_data: int, main_logger: Logger = None, **kwargs) -> None:
        self._num_rounds: int = num_rounds
        self._num_data: int = num_data
        self._main_logger: Logger = main_logger

        self._round_scores: List[float] = []

    @property
    def round_scores(self) -> List[float]:
        return self._round_scores

    def on_round_test_start(self, round_id: str) -> None:
        self._round_total_score: float = 0
        self._round_count: int = 0

    def on_round_test_end(self, round_id: str) -> None:
        self._round_scores.append(self._round_total_score / max(self._round_count, 1))

    @abstractmethod
    def _scoring_sample(self, sample: MotionSample) -> Union[float, int]:
        raise NotImplementedError

    def step_update(self, sample: MotionSample) -> None:
        score = self._scoring_sample(sample)
        sample.metric_scores[self.name] = score
        self._round_total_score += score
        self._round_count += 1

    def on_test_end(self) -> None:
        pass

    def _easy_reading_score_format(self, score: float) -> str:
        return f"{score:.4f}"

    def round_report(self) -> str:
        return self._easy_reading_score_format(self._round_scores[-1])

    def evaluation_report(self) -> Tuple[str, str, str, str]:
        return (
            self._easy_reading_score_format(np.mean(self._round_scores)),
            self._easy_reading_score_format(min(self._round_scores)),
            self._easy_reading_score_format(max(self._round_scores)),
            f"{np.std(self._round_scores):.5}"
        )


class SetMetric(BaseMetric):
    """Metric of the whole set of samples of a round, computed when the round ends."""

    def on_round_test_start(self, round_id: str) -> None:
        self._round_samples: List[MotionSample] = []

    def step_update(self, sample: MotionSample) -> None:
        self._round_samples.append(sample)

    @abstractmethod
    def _scoring_set(self, samples: List[MotionSample]) -> float:
        raise NotImplementedError

    def _scoring_sample(self, sample: MotionSample) -> Union[float, int]:
        raise NotImplementedError(f"{self.name} is only defined over a set of samples")

    def on_round_test_end(self, round_id: str) -> None:
        self._round_scores.append(self._scoring_set(self._round_samples))
