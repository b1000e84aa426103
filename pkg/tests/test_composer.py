# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import os

import numpy as np
import pytest

from motioncompose.composer import (
    CompositionSpec, CompositionTerm, FusionDiagnostics, Polarity, combine_branches, compose_pipeline,
    fusion_branches, joint_description, latent_branch, latent_conjunction, latent_negation, load_spec,
    make_temporal_score_fn, save_spec, seam_transition_ratio, semantic_compose, spec_from_dict, synergistic_fusion,
    temporal_compose, temporal_pipeline,
)
from motioncompose.composer.pipeline import pipeline_stage
from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.guidance import cfg_score
from motioncompose.diffusion.sampler import SamplerConfig
from motioncompose.diffusion.schedule import make_schedule
from motioncompose.motion_vae.model import MotionVAE
from motioncompose.toymotion.common import ConceptDescription
from motioncompose.utils.errors import (
    ConfigError, DegenerateWeightsError, InvalidInputError, SamplingFailureError, ShapeError,
)


def term(text: str, weight: float = 1.0, polarity: str = "conjoin") -> CompositionTerm:
    return CompositionTerm(ConceptDescription.from_text(text), weight, Polarity(polarity))


@pytest.fixture
def denoiser(tiny_profile):
    return Denoiser(tiny_profile, num_steps=100, seed=4)


@pytest.fixture
def sequence_denoiser(tiny_profile):
    return Denoiser(tiny_profile, substrate="sequence", num_steps=100, seed=4)


@pytest.fixture
def z_t(tiny_profile, rng):
    return rng.standard_normal((tiny_profile.latent_tokens, tiny_profile.dim))


def test_single_term_conjunction_is_classifier_free_guidance(denoiser, z_t):
    wave = term("left-limb:wave", 3.5)
    c = denoiser.embedder.embed(wave.desc)
    assert np.array_equal(latent_conjunction(denoiser, z_t, 40, [wave]), cfg_score(denoiser, z_t, 40, c, 3.5))


def test_negating_the_empty_description_is_classifier_free_guidance(denoiser, z_t):
    wave = term("left-limb:wave")
    c = denoiser.embedder.embed(wave.desc)
    out = latent_negation(denoiser, z_t, 40, wave, CompositionTerm(ConceptDescription(), polarity="negate"), 2.0)
    assert np.array_equal(out, cfg_score(denoiser, z_t, 40, c, 2.0))
    with pytest.raises(InvalidInputError):
        latent_negation(denoiser, z_t, 40, wave, wave, -1.0)


def test_latent_branch_without_negations_is_the_conjunction(denoiser, z_t):
    terms = [term("direction:+x", 2.0), term("bounce:hop", 0.5)]
    assert np.array_equal(latent_branch(denoiser, z_t, 10, terms), latent_conjunction(denoiser, z_t, 10, terms))


def test_latent_branch_negates_against_the_strongest_term(denoiser, z_t):
    plus_x, hop, wave = term("direction:+x", 2.0), term("bounce:hop", 3.0), term("left-limb:wave", 1.5, "negate")
    uncond = denoiser.predict_eps(z_t, 10, denoiser.embedder.null())
    conj = latent_conjunction(denoiser, z_t, 10, [plus_x, hop])
    cond_hop = denoiser.predict_eps(z_t, 10, denoiser.embedder.embed(hop.desc))
    cond_wave = denoiser.predict_eps(z_t, 10, denoiser.embedder.embed(wave.desc))
    expected = conj + 1.5 * (cond_hop - cond_wave)
    assert np.allclose(latent_branch(denoiser, z_t, 10, [plus_x, hop, wave], uncond=uncond), expected, atol=1e-12)
    with pytest.raises(InvalidInputError):
        latent_conjunction(denoiser, z_t, 10, [plus_x, wave])


def test_semantic_compose_with_one_term_matches_a_plain_pass(denoiser, z_t):
    hop = term("bounce:hop", 2.0)
    plain = denoiser.predict_eps(z_t, 25, denoiser.embedder.embed(hop.desc))
    assert np.allclose(semantic_compose(denoiser, z_t, 25, [hop]), plain, atol=1e-12)
    assert np.allclose(semantic_compose(denoiser, z_t, 25, [hop, term("bounce:hop", 0.5)]), plain, atol=1e-12)


def test_degenerate_semantic_weights(denoiser, z_t):
    terms = [term("direction:+x", 1.0), term("bounce:hop", 1.0, "negate")]
    with pytest.raises(DegenerateWeightsError):
        semantic_compose(denoiser, z_t, 25, terms)
    with pytest.raises(DegenerateWeightsError):
        CompositionSpec(terms=terms, lambdas=(0.5, 0.5, 0.0))
    CompositionSpec(terms=terms, lambdas=(1.0, 0.0, 0.0))


@pytest.mark.parametrize("lambdas, branch", [((1.0, 0.0, 0.0), "latent"), ((0.0, 1.0, 0.0), "semantic"),
                                             ((0.0, 0.0, 1.0), "joint")])
def test_one_hot_lambdas_select_a_single_branch(denoiser, z_t, lambdas, branch):
    terms = [term("direction:+x", 2.0), term("left-limb:wave", 1.0)]
    full = CompositionSpec(terms=terms, joint_desc=joint_description(terms), lambdas=(0.2, 0.5, 0.3))
    one_hot = CompositionSpec(terms=terms, joint_desc=joint_description(terms), lambdas=lambdas)
    expected = fusion_branches(denoiser, z_t, 60, full)[branch]
    assert np.max(np.abs(synergistic_fusion(denoiser, z_t, 60, one_hot) - expected)) <= 1e-12


@pytest.mark.parametrize("guidance_weight", [1.0, 3.0])
def test_joint_only_fusion_is_the_guided_joint_score(denoiser, z_t, guidance_weight):
    terms = [term("direction:+x", 2.0), term("left-limb:wave", 1.0)]
    spec = CompositionSpec(terms=terms, joint_desc=joint_description(terms), lambdas=(0.0, 0.0, 1.0),
                           sampler=SamplerConfig(guidance_weight=guidance_weight))
    c = denoiser.embedder.embed(spec.joint_desc)
    guided = cfg_score(denoiser, z_t, 60, c, guidance_weight, agd=spec.agd)
    assert np.max(np.abs(synergistic_fusion(denoiser, z_t, 60, spec) - guided)) <= 1e-12
    if guidance_weight == 1.0:
        raw = denoiser.predict_eps(z_t, 60, c, agd=spec.agd)
        assert np.max(np.abs(synergistic_fusion(denoiser, z_t, 60, spec) - raw)) <= 1e-12


def test_fusion_is_the_weighted_branch_sum(denoiser, z_t):
    terms = [term("direction:+x", 2.0), term("bounce:hop", 1.0), term("right-limb:raise", 0.5, "negate")]
    spec = CompositionSpec(terms=terms, joint_desc=joint_description(terms))
    branches = fusion_branches(denoiser, z_t, 60, spec)
    expected = 0.1 * branches["latent"] + 0.7 * branches["semantic"] + 0.2 * branches["joint"]
    diagnostics = FusionDiagnostics()
    assert np.allclose(synergistic_fusion(denoiser, z_t, 60, spec, diagnostics), expected, atol=1e-12)
    assert np.array_equal(combine_branches(spec.lambdas, branches), synergistic_fusion(denoiser, z_t, 60, spec))
    record = diagnostics.records[0]
    assert record["step"] == 60 and record["lambda_semantic"] == 0.7 and record["joint_norm"] > 0


def test_fusion_skips_zero_lambda_branches(denoiser, z_t):
    spec = CompositionSpec(terms=[term("direction:+x")], lambdas=(0.4, 0.6, 0.0))
    assert set(fusion_branches(denoiser, z_t, 5, spec)) == {"latent", "semantic"}


def test_spec_validation():
    wave = term("left-limb:wave")
    with pytest.raises(InvalidInputError):
        CompositionSpec(terms=[term("bounce:hop", polarity="negate")], lambdas=(1.0, 0.0, 0.0))
    with pytest.raises(InvalidInputError):
        CompositionSpec(terms=[wave], lambdas=(0.5, 0.6, 0.0))
    with pytest.raises(InvalidInputError):
        CompositionSpec(terms=[wave])
    with pytest.raises(InvalidInputError):
        CompositionSpec(terms=[wave], lambdas=(1.0, 0.0, 0.0), length=20)
    with pytest.raises(InvalidInputError):
        term("direction:+x", float("nan"))


def test_joint_description_collects_conjoin_tokens():
    terms = [term("direction:+x"), term("bounce:hop", polarity="negate"), term("left-limb:wave")]
    assert joint_description(terms).to_text() == "direction:+x@1 left-limb:wave@1"


def test_spec_file_round_trip(tmp_path):
    terms = [term("direction:+x", 5.0), term("bounce:hop", 2.5, "negate")]
    spec = CompositionSpec(
        terms=terms, joint_desc=joint_description(terms), sampler=SamplerConfig(steps=20, sampler="ancestral"), length=80,
    )
    path = str(tmp_path / "spec.yml")
    save_spec(spec, path)
    loaded = load_spec(path)
    assert loaded.terms == spec.terms and loaded.sampler == spec.sampler and loaded.lambdas == spec.lambdas
    assert loaded.joint_desc == spec.joint_desc and loaded.agd == spec.agd and loaded.length == 80


def test_example_spec_file_loads():
    spec = load_spec(os.path.join(os.path.dirname(__file__), "..", "configs", "compose_example.yml"))
    assert len(spec.conjoin_terms) == 2 and len(spec.negate_terms) == 1
    assert spec.length == 120


@pytest.mark.parametrize("data", [
    {"terms": [{"description": "direction:+x"}], "colour": "red"},
    {"terms": [{"description": "direction:+x", "scale": 2}]},
    {"terms": [{"description": "direction:+x"}], "lambdas": {"latent": 1.0, "style": 0.0}},
    {"terms": [{"description": "direction:+x"}], "sampler": {"steps": 10, "eta": 0.0}},
    {"lambdas": {"latent": 1.0}},
])
def test_spec_rejects_bad_files(data):
    with pytest.raises(ConfigError):
        spec_from_dict(data)


def test_temporal_compose_stitches_scores():
    s1, s2 = np.ones((50, 6)), 2 * np.ones((60, 6))
    stitched = temporal_compose(s1, s2, np.full((10, 6), 0.5), 10)
    assert stitched.shape == (100, 6)
    assert np.all(stitched[:40] == 1.0) and np.all(stitched[40:50] == 2.5) and np.all(stitched[50:] == 2.0)
    assert np.array_equal(temporal_compose(s1, s2, np.zeros((0, 6)), 0), np.concatenate([s1, s2]))
    with pytest.raises(InvalidInputError):
        temporal_compose(s1, s2, np.zeros((51, 6)), 51)
    with pytest.raises(ShapeError):
        temporal_compose(s1, s2, np.zeros((5, 6)), 10)


def test_temporal_score_fn(sequence_denoiser, denoiser, rng):
    a, b = ConceptDescription.from_text("direction:+x"), ConceptDescription.from_text("bounce:hop")
    score_fn = make_temporal_score_fn(sequence_denoiser, a, b, 40, 50, 10, 2.0)
    x = rng.standard_normal((2, 80, 6))
    assert score_fn(x, 30).shape == (2, 80, 6)
    with pytest.raises(ShapeError):
        score_fn(x[:, :70], 30)
    with pytest.raises(InvalidInputError):
        make_temporal_score_fn(denoiser, a, b, 40, 50, 10, 2.0)


def test_seam_transition_ratio_of_a_uniform_ramp():
    frames = np.outer(np.arange(100, dtype=np.float64), np.array([0.01, 0.02, 0.0, 0.0, 0.0, 0.0]))
    assert seam_transition_ratio(frames, 50, 10) == pytest.approx(1.0)
    frames[45:] += 1.0
    assert seam_transition_ratio(frames, 50, 10) > 2.0


def test_compose_pipeline_latent(tiny_profile, denoiser):
    vae = MotionVAE(tiny_profile, seed=1)
    spec = CompositionSpec(
        terms=[term("direction:+x", 2.0), term("left-limb:wave", 2.0)], joint_desc=ConceptDescription.from_text(
            "direction:+x left-limb:wave"), sampler=SamplerConfig(steps=3, seed=2), length=48,
    )
    diagnostics = FusionDiagnostics()
    motions = compose_pipeline(spec, denoiser, make_schedule(100), vae, count=2, diagnostics=diagnostics)
    assert len(motions) == 2 and all(m.length == 48 for m in motions)
    assert motions[0].metadata["composition"] == ["direction:+x@1", "left-limb:wave@1"]
    assert len(diagnostics.records) == 3
    again = compose_pipeline(spec, denoiser, make_schedule(100), vae, count=2)
    assert np.array_equal(again[1].frames, motions[1].frames)

    with pytest.raises(InvalidInputError):
        compose_pipeline(spec, denoiser, make_schedule(100), None)
    with pytest.raises(InvalidInputError):
        compose_pipeline(spec, denoiser, make_schedule(100), vae, count=0)


def test_compose_pipeline_sequence_wraps_angles(sequence_denoiser):
    spec = CompositionSpec(
        terms=[term("direction:circle")], lambdas=(0.5, 0.5, 0.0),
        sampler=SamplerConfig(substrate="sequence", steps=2), length=40,
    )
    motions = compose_pipeline(spec, sequence_denoiser, make_schedule(100))
    frames = motions[0].frames
    assert frames.shape == (40, 6)
    assert np.all(np.abs(frames[:, 2:5]) <= np.pi)


def test_temporal_pipeline_length(sequence_denoiser):
    a, b = ConceptDescription.from_text("direction:+x"), ConceptDescription.from_text("bounce:hop")
    motions = temporal_pipeline(sequence_denoiser, make_schedule(100), a, b, 40, 60, 20, SamplerConfig(steps=2))
    assert motions[0].length == 80 and motions[0].metadata["overlap"] == 20
    with pytest.raises(InvalidInputError):
        temporal_pipeline(sequence_denoiser, make_schedule(100), a, b, 150, 150, 10, SamplerConfig(steps=2))


def test_pipeline_stage_tags_errors():
    with pytest.raises(SamplingFailureError) as e:
        with pipeline_stage("sample"):
            raise SamplingFailureError("diverged", step=3)
    assert e.value.stage == "sample"
    with pytest.raises(InvalidInputError) as e:
        with pipeline_stage("decode"):
            with pipeline_stage("sample"):
                raise InvalidInputError("bad")
    assert e.value.stage == "sample"
