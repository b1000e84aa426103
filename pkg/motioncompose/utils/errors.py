# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Optional


class MotionComposeError(Exception):
    """Base class of every error raised on purpose by motioncompose. `exit_code` is what the CLI returns."""
    exit_code: int = 1


class InvalidInputError(MotionComposeError, ValueError):
    exit_code: int = 10


class ShapeError(MotionComposeError, ValueError):
    exit_code: int = 11


class StateError(MotionComposeError, RuntimeError):
    exit_code: int = 12


class ConfigError(MotionComposeError):
    exit_code: int = 2


class DatasetError(MotionComposeError, IOError):
    exit_code: int = 3


class CheckpointError(MotionComposeError, IOError):
    exit_code: int = 6


class DegenerateWeightsError(InvalidInputError):
    exit_code: int = 13


class _StepError(MotionComposeError):
    def __init__(self, msg: str, step: Optional[int] = None) -> None:
        self.step: Optional[int] = step
        if step is not None:
            msg = f"{msg} (step {step})"
        super().__init__(msg)


class TrainingFailureError(_StepError):
    exit_code: int = 4


class SamplingFailureError(_StepError):
    exit_code: int = 5
