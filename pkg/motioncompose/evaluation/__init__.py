# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from motioncompose.evaluation.common import MotionSample
from motioncompose.evaluation.energy_grid import (
    EnergyGrid, Plane, coordinate_plane, energy_grid, grid_correlation, load_grid_csv, pca_plane, save_grid_csv,
)
from motioncompose.evaluation.evaluator import Evaluator
from motioncompose.evaluation.features import FEATURE_DIM, FEATURE_NAMES, FEATURE_VERSION, feature_matrix, motion_features
from motioncompose.evaluation.statistics import ConfidenceInterval, bootstrap_ci, bootstrap_diff_ci


__all__ = [
    "ConfidenceInterval", "EnergyGrid", "Evaluator", "FEATURE_DIM", "FEATURE_NAMES", "FEATURE_VERSION",
    "MotionSample", "Plane", "bootstrap_ci", "bootstrap_diff_ci", "coordinate_plane", "energy_grid",
    "feature_matrix", "grid_correlation", "load_grid_csv", "motion_features", "pca_plane", "save_grid_csv",
]
