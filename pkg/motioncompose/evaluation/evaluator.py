# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import importlib
import json
import os
from typing import Dict, List

import numpy as np
import pandas as pd
from tabulate import tabulate

from motioncompose.evaluation.common import MotionSample
from motioncompose.evaluation.features import FEATURE_VERSION
from motioncompose.evaluation.metrics.base import BaseMetric
from motioncompose.utils.config_loader import load_class
from motioncompose.utils.logger import Logger


DEFAULT_METRICS: List[str] = [
    "ConceptRecall", "FrechetDistance", "Diversity", "Multimodality", "MMDistance", "TransitionDistance", "Jerk",
]


class Evaluator:
    def __init__(
        self, evaluator_config: dict, num_rounds: int, num_data: int, log_dir: str,
        main_logger: Logger = None, name: str = "", **kwargs,
    ) -> None:
        self._evaluator_config: dict = evaluator_config
        self._num_rounds: int = num_rounds
        self._num_data: int = num_data
        self._log_dir: str = log_dir
        self._main_logger: Logger = main_logger
        self._name: str = "Evaluator" + (f" {name}" if name else "")

        self._metrics: List[BaseMetric] = []
        self._metrics_by_name: Dict[str, BaseMetric] = {}

        self._init_metrics(**kwargs)

        self._start_report()

    def _init_metrics(self, **kwargs) -> None:
        metric_class_list: List[type] = []

        # Step 1: Built-in metrics by class name.
        metric_module = importlib.import_module("motioncompose.evaluation.metrics")
        for metric_name in self._evaluator_config.get("metrics", DEFAULT_METRICS):
            metric_class = getattr(metric_module, metric_name, None)
            assert metric_class is not None, f"Unknown metric {metric_name}"
            metric_class_list.append(metric_class)

        # Step 2: Custom metrics given by module_path/class_name.
        metric_configs = self._evaluator_config.get("custom_metrics", [])
        if not isinstance(metric_configs, list):
            metric_configs = [metric_configs]
        for metric_config in metric_configs:
            assert "module_path" in metric_config, "module_path not defined"
            assert "class_name" in metric_config, "class_name not defined"
            class_names = metric_config["class_name"]
            if not isinstance(class_names, list):
                class_names = [class_names]
            for metric_name in class_names:
                metric_class_list.append(load_class(metric_config["module_path"], metric_name, BaseMetric))

        for metric_class in metric_class_list:
            metric = metric_class(
                num_rounds=self._num_rounds,
                num_data=self._num_data,
                main_logger=self._main_logger,
                **kwargs,
            )
            self._metrics.append(metric)
            self._metrics_by_name[metric.name] = metric

        return

    @property
    def metric_names(self) -> List[str]:
        return [metric.name for metric in self._metrics]

    def on_round_test_start(self, round_id: str) -> None:
        for metric in self._metrics:
            metric.on_round_test_start(round_id)

    def on_round_test_end(self, round_id: str) -> None:
        for metric in self._metrics:
            metric.on_round_test_end(round_id)
        self._round_report(round_id)

    def update_round_metrics(self, sample: MotionSample) -> None:
        for metric in self._metrics:
            metric.step_update(sample)

    def on_test_end(self) -> dict:
        for metric in self._metrics:
            metric.on_test_end()

        self._evaluation_report()
        self._dump_metrics()
        return self._dump_report()

    def _log(self, msg: str) -> None:
        if self._main_logger is not None:
            self._main_logger.info(msg, tag=self._name)
        else:
            print(msg)

    def _start_report(self) -> None:
        self._log(f"Evaluator initialized with {self.metric_names}.")

    def _round_report(self, round_id: str) -> None:
        if len(self._metrics) == 0:
            return

        metric_reports = []
        for metric in self._metrics:
            metric_reports.append([metric.name, metric.round_report()])
        report_table = tabulate(metric_reports, headers=["Metric", "Score"])

        self._log(f"{round_id}: {len(self._metrics)} metrics over {self._num_data} samples:\n\n{report_table}\n")

    def _evaluation_report(self) -> None:
        if len(self._metrics) == 0 or self._num_rounds == 0:
            return

        evaluation_reports = []
        for metric in self._metrics:
            arrow = "↓" if metric.lower_is_better else "↑"
            evaluation_reports.append([f"{metric.name} {arrow}"] + list(metric.evaluation_report()))
        report_table = tabulate(evaluation_reports, headers=["Metric", "Avg.", "Min", "Max", "Std."])

        self._log(f"{len(self._metrics)} Evaluation Metrics over {self._num_rounds} rounds:\n\n{report_table}\n")

    def _dump_metrics(self) -> None:
        if len(self._metrics) == 0 or self._num_rounds == 0:
            return

        data = {"Round": [1 + i for i in range(self._num_rounds)] + ["Average"]}
        for metric in self._metrics:
            data[metric.name] = list(metric.round_scores) + [np.mean(metric.round_scores)]

        df_metrics = pd.DataFrame(data)
        df_metrics.to_csv(os.path.join(self._log_dir, f"{self._name}_metrics.csv"), index=False)

    def _dump_report(self) -> dict:
        report = {
            "feature_version": FEATURE_VERSION,
            "num_rounds": self._num_rounds,
            "num_data": self._num_data,
            "metrics": {
                metric.name: {
                    "mean": float(np.mean(metric.round_scores)) if len(metric.round_scores) > 0 else None,
                    "rounds": [float(score) for score in metric.round_scores],
                    "lower_is_better": metric.lower_is_better,
                }
                for metric in self._metrics
            },
        }
        with open(os.path.join(self._log_dir, f"{self._name}_report.json"), "w") as fout:
            json.dump(report, fout, indent=2, sort_keys=True)
        return report
