# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import jsonlines
import numpy as np
from tqdm import tqdm

from motioncompose.composer.common import CompositionSpec, CompositionTerm, Polarity
from motioncompose.evaluation.common import MotionSample
from motioncompose.evaluation.evaluator import Evaluator
from motioncompose.evaluation.features import FEATURE_DIM, feature_matrix
from motioncompose.evaluation.metrics.concept_recall import concept_recall
from motioncompose.evaluation.statistics import bootstrap_ci
from motioncompose.numerics.rng import make_rng, split_seed
from motioncompose.toymotion.classifier import concept_classifier, description_present
from motioncompose.toymotion.common import ConceptDescription, MotionSequence
from motioncompose.toymotion.dataset import sample_description
from motioncompose.toymotion.synthesizer import synthesize_motion
from motioncompose.utils.logger import Logger
from motioncompose.workflows.common import EvaluationConfig, RunConfig
from motioncompose.workflows.generation import MotionGenerator
from motioncompose.workflows.sampling import _GenerationWorkflow


# Negated terms weigh half their conjoined partner, so the signed semantic weights never cancel.
NEGATION_WEIGHT_RATIO: float = 0.5


def protocol_descriptions(config: RunConfig, round_idx: int) -> List[ConceptDescription]:
    protocol = config.evaluation
    min_tokens, max_tokens = protocol.min_tokens, protocol.max_tokens
    if protocol.protocol == "conjunction":
        min_tokens, max_tokens = max(2, min_tokens), max(2, max_tokens)
    elif protocol.protocol == "negation":
        min_tokens = max_tokens = 2

    rng = make_rng(config.seed, "evaluate", "descriptions", round_idx)
    return [
        sample_description(rng, config.dataset.generator.family_weights, min_tokens, max_tokens)
        for _ in range(protocol.num_descriptions)
    ]


def conjunction_spec(
    desc: ConceptDescription, config: RunConfig, generator: MotionGenerator, seed: int,
    negate: Optional[ConceptDescription] = None,
) -> CompositionSpec:
    """One conjoin term per token of `desc`, optionally followed by a negated description."""
    w = generator.sampler.guidance_weight
    terms = [CompositionTerm(ConceptDescription((token,)), weight=w) for token in desc.tokens]
    if negate is not None:
        terms.append(CompositionTerm(negate, weight=NEGATION_WEIGHT_RATIO * w, polarity=Polarity.negate))
    return CompositionSpec(
        terms=terms, joint_desc=desc, lambdas=config.composition.lambdas, agd=config.composition.agd,
        sampler=dataclasses.replace(generator.sampler, seed=seed), length=config.evaluation.length,
    )


def recall_hits(
    generator: MotionGenerator, descriptions: List[ConceptDescription], draws: int, seed: int, length: int,
    num_parallel: int = 1,
) -> np.ndarray:
    """0/1 oracle hit per generated sample (descriptions × draws), single-description guidance."""
    def hits(item: Tuple[int, ConceptDescription]) -> List[int]:
        idx, desc = item
        motions = generator.generate(desc, draws, split_seed(seed, "recall", idx), length)
        return [int(description_present(m, desc)) for m in motions]

    with ThreadPoolExecutor(max_workers=max(1, num_parallel)) as executor:
        return np.array([hit for group in executor.map(hits, enumerate(descriptions)) for hit in group])


class EvaluateWorkflow(_GenerationWorkflow):
    name: str = "evaluate"

    def __init__(self, config: RunConfig, checkpoint: Optional[str] = None, out_dir: Optional[str] = None) -> None:
        super().__init__(config, checkpoint, out_dir if out_dir is not None else config.evaluation.output_dir)
        self._protocol: EvaluationConfig = config.evaluation
        os.makedirs(self._out_dir, exist_ok=True)

        self._init_evaluator()

        self._init_samples_table()

    def _init_evaluator(self) -> None:
        metrics = list(self._protocol.metrics)
        total = self._protocol.num_descriptions * self._protocol.draws_per_description
        if "FrechetDistance" in metrics and total <= FEATURE_DIM:
            self._logger.warning(
                f"FrechetDistance needs more than {FEATURE_DIM} samples per round but {total} are drawn; skipped",
                tag=self.name,
            )
            metrics.remove("FrechetDistance")

        # Filled with each round's ground-truth features before the round starts.
        self._references: Dict[str, np.ndarray] = {}
        self._evaluator = Evaluator(
            evaluator_config={
                "metrics": metrics,
                "custom_metrics": [dataclasses.asdict(custom) for custom in self._protocol.custom_metrics],
            },
            num_rounds=self._protocol.rounds,
            num_data=total,
            log_dir=self._out_dir,
            main_logger=self._logger,
            reference_features=self._references,
            diversity_pairs=self._protocol.diversity_pairs,
            multimodality_subset=self._protocol.multimodality_subset,
            seed=self._config.seed,
        )
        return

    def _init_samples_table(self) -> None:
        self._samples_logger = Logger(
            f"{self._config.experiment_name}.{self.name}.samples", dump_folder=self._config.log_dir,
            extension_name="csv",
        )
        self._samples_logger.debug("|".join(["Round", "Description", "Draw"] + self._evaluator.metric_names))
        return

    def _update_samples_table(self, round_idx: int, draw: int, sample: MotionSample) -> None:
        scores = [str(sample.metric_scores.get(name, "")) for name in self._evaluator.metric_names]
        self._samples_logger.debug("|".join([str(round_idx), sample.description.to_text(), str(draw)] + scores))
        return

    def _generate_group(self, round_idx: int, idx: int, desc: ConceptDescription) -> Tuple[List[MotionSequence], dict]:
        seed = split_seed(self._config.seed, "evaluate", round_idx, idx)
        draws, length = self._protocol.draws_per_description, self._protocol.length
        generator = self._generator
        if self._protocol.protocol == "single":
            return generator.generate(desc, draws, seed, length), {}
        if self._protocol.protocol == "conjunction":
            return generator.compose(conjunction_spec(desc, self._config, generator, seed), draws), {}

        # Negation: keep the first token, suppress the second.
        keep, drop = ConceptDescription(desc.tokens[:1]), ConceptDescription(desc.tokens[1:])
        negated = generator.compose(conjunction_spec(keep, self._config, generator, seed, negate=drop), draws)
        conjoined = generator.compose(conjunction_spec(desc, self._config, generator, seed), draws)
        token = drop.tokens[0]
        extra = {
            "negated_activation": [concept_classifier(m, token) for m in negated],
            "conjoined_activation": [concept_classifier(m, token) for m in conjoined],
        }
        return negated, extra

    def _target(self, desc: ConceptDescription) -> ConceptDescription:
        return ConceptDescription(desc.tokens[:1]) if self._protocol.protocol == "negation" else desc

    def _reference_features(self, descriptions: List[ConceptDescription], round_idx: int) -> np.ndarray:
        motions = [
            synthesize_motion(
                self._target(desc), self._protocol.length, self._protocol.reference_noise,
                split_seed(self._config.seed, "reference", round_idx, idx, draw),
            )
            for idx, desc in enumerate(descriptions) for draw in range(self._protocol.draws_per_description)
        ]
        return feature_matrix(motions)

    def run(self) -> Dict:
        rounds = self._protocol.rounds
        all_samples: List[MotionSample] = []
        negation: Dict[str, List[float]] = {"negated_activation": [], "conjoined_activation": []}
        fout = jsonlines.open(os.path.join(self._out_dir, "samples.jsonl"), "w")
        for round_idx in range(rounds):
            round_id = f"Round{round_idx}"
            descriptions = protocol_descriptions(self._config, round_idx)
            self._references[round_id] = self._reference_features(descriptions, round_idx)
            self._evaluator.on_round_test_start(round_id)

            with ThreadPoolExecutor(max_workers=self._protocol.num_parallel) as executor:
                futures = [
                    executor.submit(self._generate_group, round_idx, idx, desc) for idx, desc in enumerate(descriptions)
                ]
                pbar = tqdm(total=len(futures), desc=f"[{self._config.experiment_name}] {round_id}")
                for desc, future in zip(descriptions, futures):
                    motions, extra = future.result()
                    for key, values in extra.items():
                        negation[key].extend(values)
                    target = self._target(desc)
                    for draw, motion in enumerate(motions):
                        sample = MotionSample(motion, target, group=f"{round_idx}:{target.to_text()}", seed=draw)
                        self._evaluator.update_round_metrics(sample)
                        all_samples.append(sample)
                        fout.write({"round": round_idx, **sample.as_dict()})
                        self._update_samples_table(round_idx, draw, sample)
                    pbar.update(1)
                pbar.close()

            self._evaluator.on_round_test_end(round_id)
        fout.close()

        report = self._evaluator.on_test_end()
        report["protocol"] = self._protocol.protocol

        recall = concept_recall([(sample.motion, sample.description) for sample in all_samples])
        hits = np.array([int(description_present(s.motion, s.description)) for s in all_samples])
        report["concept_recall"] = recall.as_dict()
        if len(hits) >= 2:
            report["concept_recall"]["ci"] = bootstrap_ci(hits, seed=self._config.seed).as_dict()
        self._logger.info(f"Concept recall: {recall.as_dict()}", tag=self.name)

        if self._protocol.protocol == "negation":
            negated, conjoined = np.mean(negation["negated_activation"]), np.mean(negation["conjoined_activation"])
            report["negation"] = {
                "negated_activation": float(negated),
                "conjoined_activation": float(conjoined),
                "ratio": float(negated / conjoined) if conjoined > 0 else None,
            }
            self._logger.info(f"Negation suppression: {report['negation']}", tag=self.name)

        with open(os.path.join(self._out_dir, "report.json"), "w", encoding="utf-8") as fout:
            json.dump(report, fout, indent=2, sort_keys=True)
        return report
