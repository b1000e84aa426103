# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

"""Desk-scale checks against trained models. They train from scratch and take hours on a CPU: run with `-m slow`."""

import dataclasses
import os
from typing import List

import numpy as np
import pytest
import yaml

from motioncompose.cli import main
from motioncompose.composer.pipeline import temporal_pipeline
from motioncompose.composer.temporal import seam_transition_ratio
from motioncompose.denoiser.energy_attention import AgdConfig
from motioncompose.evaluation.metrics.smoothness import transition_distance
from motioncompose.evaluation.statistics import bootstrap_diff_ci
from motioncompose.numerics.rng import make_rng, split_seed
from motioncompose.toymotion.classifier import concept_classifier, description_present
from motioncompose.toymotion.common import ConceptDescription
from motioncompose.toymotion.dataset import sample_description
from motioncompose.utils.config_loader import load_yaml_config
from motioncompose.workflows import AugmentWorkflow, MotionGenerator, VisualizeWorkflow, load_run_config
from motioncompose.workflows.augment import single_concept_descriptions
from motioncompose.workflows.common import checkpoint_schedule, load_denoiser, load_vae
from motioncompose.workflows.evaluate import conjunction_spec, recall_hits


pytestmark = pytest.mark.slow

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")
SAMPLES = 200
LENGTH = 120


def _train(root: str, config_name: str, with_vae: bool) -> str:
    data = load_yaml_config(os.path.join(CONFIG_DIR, config_name))
    data["log_dir"] = os.path.join(root, "logs")
    data["dataset"]["path"] = os.path.join(root, "data", "train.tmot")
    data["dataset"]["eval_path"] = os.path.join(root, "data", "eval.tmot")
    data["vae"]["checkpoint"] = os.path.join(root, "ckpt", "vae.ckpt")
    data["diffusion"]["checkpoint"] = os.path.join(root, "ckpt", "denoiser.ckpt")
    data["augment"]["output_dataset"] = os.path.join(root, "augmented", "train.tmot")
    data["augment"]["output_checkpoint"] = os.path.join(root, "ckpt", "denoiser_augmented.ckpt")
    data["viz"]["output_dir"] = os.path.join(root, "viz")
    config_path = os.path.join(root, "config.yml")
    with open(config_path, "w") as fout:
        yaml.safe_dump(data, fout)

    assert main(["make-dataset", "--config", config_path]) == 0
    if with_vae:
        assert main(["train-vae", "--config", config_path]) == 0
    assert main(["train-diffusion", "--config", config_path]) == 0
    return config_path


def _generator(config_path: str) -> MotionGenerator:
    config = load_run_config(config_path)
    denoiser, ckpt = load_denoiser(config.diffusion.checkpoint)
    vae = load_vae(config.vae.checkpoint) if denoiser.substrate == "latent" else None
    return MotionGenerator(denoiser, checkpoint_schedule(ckpt), config.sampler, vae)


@pytest.fixture(scope="module")
def latent_run(tmp_path_factory):
    return _train(str(tmp_path_factory.mktemp("desk")), "desk.yml", with_vae=True)


@pytest.fixture(scope="module")
def sequence_run(tmp_path_factory):
    return _train(str(tmp_path_factory.mktemp("desk_sequence")), "desk_sequence.yml", with_vae=False)


def two_concept_descriptions(count: int, seed: int) -> List[ConceptDescription]:
    rng = make_rng(seed, "acceptance", "descriptions")
    weights = {name: 1.0 for name in ("direction", "left-limb", "right-limb", "bounce")}
    return [sample_description(rng, weights, 2, 2) for _ in range(count)]


def test_single_concept_accuracy(latent_run):
    generator = _generator(latent_run)
    for desc in single_concept_descriptions():
        hits = recall_hits(generator, [desc], SAMPLES, seed=1, length=LENGTH)
        assert hits.mean() >= 0.9, desc.to_text()


def test_conjunction_ablation_directions(latent_run):
    config = load_run_config(latent_run)
    generator = _generator(latent_run)
    hits = {"latent": [], "semantic": [], "fused": []}
    transitions = {"latent": [], "semantic": [], "fused": []}
    lambdas = {"latent": (1.0, 0.0, 0.0), "semantic": (0.0, 1.0, 0.0), "fused": (0.1, 0.7, 0.2)}

    for idx, desc in enumerate(two_concept_descriptions(SAMPLES, seed=2)):
        seed = split_seed(2, "conjunction", idx)
        for name, lam in lambdas.items():
            spec = dataclasses.replace(conjunction_spec(desc, config, generator, seed), lambdas=lam, length=LENGTH)
            motion = generator.compose(spec)[0]
            hits[name].append(int(description_present(motion, desc)))
            transitions[name].append(transition_distance(motion))

    assert np.mean(hits["semantic"]) > np.mean(hits["latent"])
    assert np.mean(transitions["latent"]) < np.mean(transitions["semantic"])
    assert bootstrap_diff_ci(hits["fused"], hits["latent"]).high >= 0.0
    assert bootstrap_diff_ci(transitions["fused"], transitions["semantic"]).low <= 0.0


def test_negation_suppresses_the_negated_concept(latent_run):
    config = load_run_config(latent_run)
    generator = _generator(latent_run)
    negated, conjoined = [], []
    for idx, desc in enumerate(two_concept_descriptions(SAMPLES, seed=3)):
        seed = split_seed(3, "negation", idx)
        keep, drop = ConceptDescription(desc.tokens[:1]), ConceptDescription(desc.tokens[1:])
        spec = conjunction_spec(keep, config, generator, seed, negate=drop)
        negated.append(concept_classifier(generator.compose(spec)[0], drop.tokens[0]))
        conjoined.append(concept_classifier(generator.compose(conjunction_spec(desc, config, generator, seed))[0], drop.tokens[0]))
    assert np.mean(negated) <= 0.5 * np.mean(conjoined)


def test_agd_step_sizes(latent_run):
    generator = _generator(latent_run)
    descriptions = two_concept_descriptions(SAMPLES // 2, seed=4)

    def recall(agd: AgdConfig) -> float:
        hits = [
            description_present(m, desc)
            for idx, desc in enumerate(descriptions)
            for m in generator.generate(desc, 2, split_seed(4, "agd", idx), LENGTH, agd=agd)
        ]
        return float(np.mean(hits))

    plain = recall(AgdConfig())
    assert recall(AgdConfig(gamma_attn=0.001, gamma_reg=0.002)) >= plain - 0.01
    assert recall(AgdConfig(gamma_attn=0.1, gamma_reg=0.2)) < plain


def test_augmentation_keeps_single_concept_recall(latent_run):
    workflow = AugmentWorkflow(load_run_config(latent_run))
    try:
        report = workflow.run()
    finally:
        workflow.close()
    assert report["composed"] >= 0.95 * report["count"]
    assert report["recall_delta"]["estimate"] >= -0.02
    assert report["recall_delta"]["low"] <= report["recall_delta"]["estimate"] <= report["recall_delta"]["high"]


def test_energy_surfaces_follow_the_joint_description(latent_run):
    workflow = VisualizeWorkflow(load_run_config(latent_run), os.path.join(CONFIG_DIR, "compose_example.yml"))
    try:
        correlations = workflow.run()["correlations"]
    finally:
        workflow.close()
    assert correlations["conjunction~joint"] > correlations["conjunction~unrelated"]


def test_stitched_seams_are_smooth(sequence_run):
    generator = _generator(sequence_run)
    first, second = ConceptDescription.from_text("direction:+x"), ConceptDescription.from_text("left-limb:wave")
    for seed in range(100):
        sampler = dataclasses.replace(generator.sampler, seed=seed)
        motion = temporal_pipeline(generator.denoiser, generator.schedule, first, second, 80, 80, 20, sampler)[0]
        assert motion.length == 140
        assert seam_transition_ratio(motion.frames, 80, 20) <= 2.0
