# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import numpy as np
import pytest

from motioncompose.denoiser.energy_attention import AgdConfig
from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.guidance import cfg_score, guided_sum, make_cfg_score_fn
from motioncompose.diffusion.sampler import (
    SamplerConfig, SamplerKind, ancestral_step, langevin_step, sample, timestep_subsequence,
)
from motioncompose.diffusion.schedule import make_schedule, q_sample
from motioncompose.diffusion.trainer import (
    DiffusionExamples, DiffusionTrainConfig, eps_mse, finetune, train_diffusion, training_step,
)
from motioncompose.numerics.optimizer import OptimizerConfig
from motioncompose.toymotion.common import ConceptDescription
from motioncompose.utils.errors import InvalidInputError, SamplingFailureError, ShapeError, TrainingFailureError


TARGET_MEAN, TARGET_STD = 1.5, 0.5


def gaussian_score(schedule):
    """Exact ε-prediction for data ~ N(TARGET_MEAN, TARGET_STD²)."""
    def score_fn(x_t: np.ndarray, i: int) -> np.ndarray:
        alpha_bar = schedule.alpha_bars[i]
        variance = alpha_bar * TARGET_STD ** 2 + 1.0 - alpha_bar
        return np.sqrt(1.0 - alpha_bar) * (x_t - np.sqrt(alpha_bar) * TARGET_MEAN) / variance
    return score_fn


@pytest.fixture
def schedule():
    return make_schedule(1000)


@pytest.fixture
def examples(tiny_profile):
    rng = np.random.default_rng(5)
    descs = [ConceptDescription.from_text(text) for text in ("direction:+x", "bounce:hop", "left-limb:wave")] * 4
    tokens = [rng.standard_normal((tiny_profile.latent_tokens, tiny_profile.dim)) * 0.5 for _ in descs]
    return DiffusionExamples(tokens, descs)


def test_schedule_arrays(schedule):
    assert schedule.T == 1000
    assert np.all(np.diff(schedule.alpha_bars) < 0)
    assert schedule.posterior_variances[0] == 0.0
    assert schedule.alpha_bar_prev(0) == 1.0 and schedule.alpha_bar_prev(5) == schedule.alpha_bars[4]
    scaled = make_schedule(100, "scaled-linear")
    assert scaled.betas[0] == pytest.approx(1e-4) and scaled.betas[-1] == pytest.approx(0.02)
    with pytest.raises(InvalidInputError):
        make_schedule(10, "cosine")
    with pytest.raises(InvalidInputError):
        make_schedule(10, beta_min=0.1, beta_max=0.01)


def test_q_sample_bounds_and_per_row_steps(schedule):
    z0, noise = np.ones((3, 2, 4)), np.zeros((3, 2, 4))
    out = q_sample(z0, np.array([1, 500, 1000]), noise, schedule)
    assert np.allclose(out[1], np.sqrt(schedule.alpha_bars[499]))
    with pytest.raises(InvalidInputError):
        q_sample(z0, 0, noise, schedule)
    with pytest.raises(InvalidInputError):
        q_sample(z0, 1001, noise, schedule)
    with pytest.raises(ShapeError):
        q_sample(z0, 1, noise[:2], schedule)


def test_timestep_subsequence():
    assert timestep_subsequence(10, 10).tolist() == list(range(9, -1, -1))
    steps = timestep_subsequence(1000, 50)
    assert len(steps) == 50 and steps[0] == 999 and steps[-1] == 0
    assert np.all(np.diff(steps) < 0)
    with pytest.raises(InvalidInputError):
        timestep_subsequence(10, 11)


def test_ancestral_sampler_reproduces_a_gaussian(schedule):
    cfg = SamplerConfig(steps=1000, sampler=SamplerKind.ancestral, seed=11)
    x = sample(gaussian_score(schedule), cfg, schedule, (10000, 1))
    assert abs(x.mean() - TARGET_MEAN) <= 0.05
    assert abs(x.var() / TARGET_STD ** 2 - 1.0) <= 0.05


def test_deterministic_sampler_reaches_the_target_mean(schedule):
    cfg = SamplerConfig(steps=100, sampler=SamplerKind.deterministic, seed=11)
    x = sample(gaussian_score(schedule), cfg, schedule, (4000, 1))
    assert abs(x.mean() - TARGET_MEAN) <= 0.05


@pytest.mark.parametrize("kind", list(SamplerKind))
def test_fixed_seed_is_bit_identical(schedule, kind):
    cfg = SamplerConfig(steps=20, sampler=kind, seed=3)
    a = sample(gaussian_score(schedule), cfg, schedule, (5, 2))
    b = sample(gaussian_score(schedule), cfg, schedule, (5, 2))
    assert np.array_equal(a, b)


def test_sampler_reports_failing_step(schedule):
    calls = []

    def bad_score(x_t, i):
        calls.append(i)
        return np.full_like(x_t, np.nan) if len(calls) == 3 else np.zeros_like(x_t)

    with pytest.raises(SamplingFailureError) as e:
        sample(bad_score, SamplerConfig(steps=10), schedule, (2, 2))
    assert e.value.step == calls[-1]
    with pytest.raises(SamplingFailureError):
        sample(lambda x_t, i: np.zeros((1,)), SamplerConfig(steps=10), schedule, (2, 2))


def test_on_step_sees_every_step(schedule):
    seen = []
    sample(gaussian_score(schedule), SamplerConfig(steps=25), schedule, (3, 1), on_step=lambda i, x: seen.append(i))
    assert seen == timestep_subsequence(1000, 25).tolist()


def test_langevin_step_agrees_with_posterior_step_to_first_order(schedule, rng):
    x, eps = rng.standard_normal(8), rng.standard_normal(8)
    for i in (0, 10, 400, 999):
        beta = schedule.betas[i]
        gap = np.abs(langevin_step(x, eps, i, schedule) - ancestral_step(x, eps, i, i - 1, schedule, None))
        drift = np.abs(x - beta / np.sqrt(1.0 - schedule.alpha_bars[i]) * eps)
        assert np.all(gap <= beta * drift + 1e-15)


def test_sampler_config_validation():
    with pytest.raises(InvalidInputError):
        SamplerConfig(substrate="pixels")
    with pytest.raises(InvalidInputError):
        SamplerConfig(steps=0)
    with pytest.raises(InvalidInputError):
        SamplerConfig(guidance_weight=-1.0)
    assert SamplerConfig(sampler="ancestral").sampler == SamplerKind.ancestral


def test_guided_sum_order():
    u, a, b = np.array([1.0]), np.array([3.0]), np.array([2.0])
    assert guided_sum(u, []) is u
    assert guided_sum(u, [(2.0, a, b), (0.5, b, a)]).tolist() == [2.5]


def test_cfg_score_limits(tiny_profile, rng):
    denoiser = Denoiser(tiny_profile, num_steps=1000, seed=1)
    z = rng.standard_normal((tiny_profile.latent_tokens, tiny_profile.dim))
    c = denoiser.embedder.embed(ConceptDescription.from_text("direction:circle"))
    uncond = denoiser.predict_eps(z, 100, denoiser.embedder.null())
    cond = denoiser.predict_eps(z, 100, c)
    assert np.array_equal(cfg_score(denoiser, z, 100, c, 0.0), uncond)
    assert np.allclose(cfg_score(denoiser, z, 100, c, 1.0), cond, atol=1e-12)
    assert np.array_equal(make_cfg_score_fn(denoiser, c, 5.0)(z, 100), cfg_score(denoiser, z, 100, c, 5.0))

    agd = AgdConfig(gamma_attn=0.5, gamma_reg=0.5)
    refined_cond = denoiser.predict_eps(z, 100, c, agd=agd)
    assert np.array_equal(cfg_score(denoiser, z, 100, c, 2.0, agd=agd), guided_sum(uncond, [(2.0, refined_cond, uncond)]))
    with pytest.raises(InvalidInputError):
        cfg_score(denoiser, z, 100, c, -0.5)


def test_training_step_with_exact_predictor(tiny_profile, schedule, examples):
    denoiser = Denoiser(tiny_profile, num_steps=1000)
    x0, mask, descs = examples.batch(np.arange(4))
    rng = np.random.default_rng(0)
    assert training_step(denoiser, x0, descs, schedule, rng, predictor=lambda x_t, steps, noise: noise) == 0.0
    loss = training_step(denoiser, x0, descs, schedule, rng, predictor=lambda x_t, steps, noise: np.zeros_like(noise))
    assert 0.5 < loss < 1.5
    with pytest.raises(InvalidInputError):
        training_step(denoiser, x0, descs, schedule, rng, uncond_rate=1.5)


def test_examples_batching():
    examples = DiffusionExamples([np.ones((3, 6)), np.ones((5, 6))], [ConceptDescription()] * 2)
    x0, mask, _ = examples.batch(np.array([0, 1]))
    assert x0.shape == (2, 5, 6) and mask.sum() == 8
    _, mask, _ = examples.batch(np.array([1, 1]))
    assert mask is None
    assert len(examples.extend(examples)) == 4
    with pytest.raises(InvalidInputError):
        DiffusionExamples([np.ones((3, 6))], [])


def test_train_diffusion_learns_and_is_reproducible(tiny_profile, schedule, examples):
    config = DiffusionTrainConfig(steps=60, batch_size=6, optimizer=OptimizerConfig(lr=3e-3, final_lr=1e-3, stage_steps=40))
    first = Denoiser(tiny_profile, num_steps=1000, seed=1)
    before = eps_mse(first, examples, schedule, seed=2)
    history = train_diffusion(first, examples, schedule, config, show_progress=False)
    assert first.installed and len(history) == 60
    assert eps_mse(first, examples, schedule, seed=2) < before

    second = Denoiser(tiny_profile, num_steps=1000, seed=1, initialize=False)
    train_diffusion(second, examples, schedule, config, show_progress=False)
    for name in first.store.names():
        assert np.array_equal(first.store[name], second.store[name])


def test_finetune_scales_the_learning_rate(tiny_profile, schedule, examples):
    config = DiffusionTrainConfig(steps=3, batch_size=4, finetune_lr_scale=0.5)
    denoiser = Denoiser(tiny_profile, num_steps=1000)
    history = finetune(denoiser, examples, schedule, config, show_progress=False)
    assert history[0]["lr"] == pytest.approx(0.5 * config.optimizer.lr)


def test_divergence_is_reported(tiny_profile, schedule, examples):
    denoiser = Denoiser(tiny_profile, num_steps=1000)
    name = "denoiser.output.weight"
    denoiser.store.set(name, np.full(denoiser.store[name].shape, 1e300))
    with pytest.raises(TrainingFailureError) as e:
        with np.errstate(all="ignore"):
            train_diffusion(denoiser, examples, schedule, DiffusionTrainConfig(steps=2), show_progress=False)
    assert e.value.step == 0


def test_train_config_validation(tiny_profile, schedule):
    with pytest.raises(InvalidInputError):
        DiffusionTrainConfig(batch_size=0)
    with pytest.raises(InvalidInputError):
        DiffusionTrainConfig(finetune_lr_scale=0.0)
    with pytest.raises(InvalidInputError):
        train_diffusion(Denoiser(tiny_profile), DiffusionExamples([], []), schedule, DiffusionTrainConfig())
