# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import dataclasses
import os
from typing import Dict, List

from motioncompose.numerics.rng import split_seed
from motioncompose.toymotion.dataset import MotionRecord, generate_records, make_dataset, read_dataset, write_dataset
from motioncompose.workflows.common import BaseWorkflow, RunConfig


class MakeDatasetWorkflow(BaseWorkflow):
    name: str = "make-dataset"

    def __init__(self, config: RunConfig, out: str = None) -> None:
        super().__init__(config)
        self._out: str = out if out is not None else config.dataset.path

    def run(self) -> Dict:
        generator = self._config.dataset.generator
        records = make_dataset(generator, self._out, show_progress=True)
        _, reloaded = read_dataset(self._out)
        assert reloaded == records, f"Dataset {self._out} did not read back identically"
        self._logger.info(f"Wrote {len(records)} records to {self._out}", tag=self.name)

        eval_records = make_eval_records(self._config)
        eval_path = self._config.dataset.eval_path
        if self._out == self._config.dataset.path and len(eval_records) > 0:
            write_dataset(eval_records, eval_path, frame_rate=generator.frame_rate)
            self._logger.info(f"Wrote {len(eval_records)} held-out noise-free records to {eval_path}", tag=self.name)

        return {"path": os.path.abspath(self._out), "count": len(records), "eval_count": len(eval_records)}


def make_eval_records(config: RunConfig) -> List[MotionRecord]:
    """Noise-free held-out records drawn from a seed stream disjoint from the training set."""
    if config.dataset.eval_count <= 0:
        return []
    generator = dataclasses.replace(
        config.dataset.generator, count=config.dataset.eval_count, noise_level=0.0,
        seed=split_seed(config.dataset.generator.seed, "eval"),
    )
    return generate_records(generator)
