# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

import numpy as np
from tqdm import tqdm

from motioncompose.diffusion.trainer import finetune
from motioncompose.evaluation.statistics import bootstrap_ci, bootstrap_diff_ci
from motioncompose.numerics.rng import make_rng, split_seed
from motioncompose.toymotion.common import VOCABULARY, ConceptDescription, ConceptToken
from motioncompose.toymotion.dataset import MotionRecord, read_dataset, sample_description, write_dataset
from motioncompose.utils.checkpoint import file_digest, load_checkpoint, save_checkpoint
from motioncompose.utils.errors import MotionComposeError
from motioncompose.workflows.common import AugmentConfig, RunConfig, build_examples, save_denoiser
from motioncompose.workflows.evaluate import conjunction_spec, recall_hits
from motioncompose.workflows.sampling import _GenerationWorkflow


def single_concept_descriptions() -> List[ConceptDescription]:
    return [ConceptDescription((ConceptToken(family, mode),)) for family, mode in VOCABULARY]


class AugmentWorkflow(_GenerationWorkflow):
    """Compose motions for random multi-concept descriptions, add them to the training set and finetune."""
    name: str = "augment"

    def __init__(
        self, config: RunConfig, checkpoint: Optional[str] = None, count: Optional[int] = None,
        out_dataset: Optional[str] = None, out_checkpoint: Optional[str] = None,
    ) -> None:
        augment = dataclasses.replace(
            config.augment,
            count=count if count is not None else config.augment.count,
            output_dataset=out_dataset if out_dataset is not None else config.augment.output_dataset,
            output_checkpoint=out_checkpoint if out_checkpoint is not None else config.augment.output_checkpoint,
        )
        super().__init__(config, checkpoint, out_dir=os.path.dirname(os.path.abspath(augment.output_dataset)))
        self._augment: AugmentConfig = augment

    def _compose_one(self, idx: int) -> Optional[MotionRecord]:
        seed = split_seed(self._config.seed, "augment", idx)
        desc = sample_description(
            make_rng(seed, "description"), self._config.dataset.generator.family_weights,
            self._augment.min_tokens, self._augment.max_tokens,
        )
        try:
            spec = conjunction_spec(desc, self._config, self._generator, seed)
            motion = self._generator.compose(dataclasses.replace(spec, length=self._config.composition.length))[0]
        except MotionComposeError as e:
            stage = getattr(e, "stage", None) or "spec"
            self._logger.warning(f"Sample {idx} ('{desc.to_text()}') failed at stage {stage}: {e}", tag=self.name)
            return None
        return MotionRecord(motion=motion, description=desc)

    def _compose_all(self) -> List[MotionRecord]:
        with ThreadPoolExecutor(max_workers=max(1, self._augment.num_parallel)) as executor:
            results = list(tqdm(
                executor.map(self._compose_one, range(self._augment.count)), total=self._augment.count,
                desc=f"[{self._config.experiment_name}] composing",
            ))
        return [record for record in results if record is not None]

    def _recall(self) -> np.ndarray:
        return recall_hits(
            self._generator, single_concept_descriptions(), self._augment.eval_draws,
            split_seed(self._config.seed, "augment", "recall"), self._config.composition.length,
            self._augment.num_parallel,
        )

    def run(self) -> Dict:
        augment = self._augment
        if augment.count == 0:
            # No-op: the output checkpoint is the input checkpoint, byte for byte.
            digest = save_checkpoint(load_checkpoint(self._checkpoint), augment.output_checkpoint)
            self._logger.info(f"count is 0, copied {self._checkpoint} to {augment.output_checkpoint}", tag=self.name)
            return {"count": 0, "checkpoint": augment.output_checkpoint, "sha256": digest,
                    "unchanged": digest == file_digest(self._checkpoint)}

        before = self._recall()
        composed = self._compose_all()
        shortfall = augment.count - len(composed)
        if shortfall > 0:
            self._logger.warning(f"{shortfall} of {augment.count} compositions failed and were skipped", tag=self.name)
        write_dataset(composed, augment.output_dataset)
        self._logger.info(f"Wrote {len(composed)} composed records to {augment.output_dataset}", tag=self.name)

        _, records = read_dataset(self._config.dataset.path)
        generator = self._generator
        examples = build_examples(records + composed, generator.denoiser, generator.vae, fit_normalization=False)
        train_config = dataclasses.replace(self._config.diffusion.train, steps=augment.finetune_steps)
        rng = make_rng(self._config.seed, "augment", "finetune")
        history = finetune(
            generator.denoiser, examples, generator.schedule, train_config, self._logger,
            log_path=os.path.join(self._config.log_dir, f"{self._config.experiment_name}.{self.name}.jsonl"), rng=rng,
        )

        after = self._recall()
        ckpt = load_checkpoint(self._checkpoint)
        digest = save_denoiser(
            generator.denoiser, augment.output_checkpoint, self._config, step=ckpt.step + len(history), rng=rng,
            extra={"schedule": ckpt.metadata["schedule"], "augmented_samples": len(composed)},
        )

        report = {
            "count": augment.count,
            "composed": len(composed),
            "shortfall": shortfall,
            "dataset": augment.output_dataset,
            "checkpoint": augment.output_checkpoint,
            "sha256": digest,
            "recall_before": bootstrap_ci(before, seed=self._config.seed).as_dict(),
            "recall_after": bootstrap_ci(after, seed=self._config.seed).as_dict(),
            "recall_delta": bootstrap_diff_ci(after, before, seed=self._config.seed).as_dict(),
        }
        self._logger.info(
            f"Single-concept recall {report['recall_before']['estimate']:.2%} -> {report['recall_after']['estimate']:.2%} "
            f"(delta 95% CI [{report['recall_delta']['low']:+.2%}, {report['recall_delta']['high']:+.2%}])",
            tag=self.name,
        )
        with open(os.path.join(self._out_dir, "augment_report.json"), "w", encoding="utf-8") as fout:
            json.dump(report, fout, indent=2, sort_keys=True)
        return report
