# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import dataclasses
from typing import List

import numpy as np
import pytest

from motioncompose.common import ModelProfile
from motioncompose.toymotion.dataset import DatasetConfig, MotionRecord, generate_records
from motioncompose.utils.logger import Logger


TINY_PROFILE = ModelProfile(name="tiny", latent_tokens=3, dim=8, layers=2, heads=2, ff_mult=2)


@pytest.fixture
def tiny_profile() -> ModelProfile:
    return dataclasses.replace(TINY_PROFILE)


@pytest.fixture
def records() -> List[MotionRecord]:
    config = DatasetConfig(count=12, min_length=40, max_length=60, noise_level=0.02, max_tokens=3, seed=3)
    return generate_records(config)


@pytest.fixture
def logger(tmp_path) -> Logger:
    logger = Logger("test", dump_folder=str(tmp_path))
    yield logger
    logger.close()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
