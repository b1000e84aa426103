# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from motioncompose.workflows.augment import AugmentWorkflow
from motioncompose.workflows.common import BaseWorkflow, RunConfig, load_run_config
from motioncompose.workflows.compose import ComposeWorkflow, StitchWorkflow
from motioncompose.workflows.dataset import MakeDatasetWorkflow
from motioncompose.workflows.evaluate import EvaluateWorkflow
from motioncompose.workflows.generation import MotionGenerator
from motioncompose.workflows.sampling import SampleWorkflow
from motioncompose.workflows.training import TrainDiffusionWorkflow, TrainVaeWorkflow
from motioncompose.workflows.visualize import VisualizeWorkflow


__all__ = [
    "AugmentWorkflow", "BaseWorkflow", "ComposeWorkflow", "EvaluateWorkflow", "MakeDatasetWorkflow",
    "MotionGenerator", "RunConfig", "SampleWorkflow", "StitchWorkflow", "TrainDiffusionWorkflow",
    "TrainVaeWorkflow", "VisualizeWorkflow", "load_run_config",
]
