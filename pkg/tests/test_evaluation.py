# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import json
import os

import numpy as np
import pandas as pd
import pytest

from motioncompose.evaluation import (
    EnergyGrid, Evaluator, FEATURE_DIM, MotionSample, bootstrap_ci, bootstrap_diff_ci, coordinate_plane, energy_grid,
    feature_matrix, grid_correlation, load_grid_csv, motion_features, pca_plane, save_grid_csv,
)
from motioncompose.evaluation.metrics import (
    FrechetDistance, concept_recall, diversity, frechet_distance, frechet_from_moments, jerk_metric, mm_distance,
    multimodality, transition_distance,
)
from motioncompose.evaluation.metrics.diversity import diversity_pairs, multimodality_from_groups, subset_pairs
from motioncompose.toymotion.common import ConceptDescription
from motioncompose.toymotion.synthesizer import synthesize_motion
from motioncompose.utils.errors import InvalidInputError, ShapeError


def desc(text: str) -> ConceptDescription:
    return ConceptDescription.from_text(text)


def noisy_motions(text: str, count: int, seed: int = 0, length: int = 80):
    return [synthesize_motion(desc(text), length, noise_level=0.05, seed=seed + idx) for idx in range(count)]


def test_frechet_closed_form():
    mu_a, mu_b = np.array([1.0, 2.0]), np.array([0.0, 0.0])
    value = frechet_from_moments(mu_a, np.diag([4.0, 1.0]), mu_b, np.eye(2))
    assert value == pytest.approx(5.0 + 1.0)
    assert frechet_from_moments(mu_b, np.eye(2), mu_b, np.eye(2)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidInputError):
        frechet_from_moments(mu_a, np.diag([1.0, -1.0]), mu_b, np.eye(2))


def test_frechet_distance_properties(rng):
    a = rng.standard_normal((200, 4))
    b = rng.standard_normal((200, 4)) * 1.5 + 0.5
    assert frechet_distance(a, a) == pytest.approx(0.0, abs=1e-8)
    assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-8)
    assert frechet_distance(a, b) > frechet_distance(a, rng.standard_normal((200, 4))) >= 0
    with pytest.raises(InvalidInputError):
        frechet_distance(a[:4], b)
    with pytest.raises(InvalidInputError):
        frechet_distance(a, b[:, :3])


def test_frechet_rejects_feature_sets_with_singular_covariance(rng):
    a, b = rng.standard_normal((50, 3)), rng.standard_normal((50, 3))
    a[:, 2] = 1.0
    b[:, 2] = 1.0
    with pytest.raises(InvalidInputError):
        frechet_distance(a, b)
    # A column copied from another one leaves the set rank deficient too.
    c = rng.standard_normal((50, 3))
    c[:, 1] = 2.0 * c[:, 0]
    with pytest.raises(InvalidInputError):
        frechet_distance(c, rng.standard_normal((50, 3)))
    with pytest.raises(InvalidInputError):
        frechet_distance(np.zeros((50, 3)), rng.standard_normal((50, 3)))


def test_fid_of_a_degenerate_round_is_nan(logger):
    d = desc("direction:+x")
    reference = feature_matrix(noisy_motions("direction:+x", FEATURE_DIM + 10))
    metric = FrechetDistance(num_rounds=1, num_data=FEATURE_DIM + 10, main_logger=logger, reference_features=reference)
    metric.on_round_test_start("Round0")
    # Noise-free draws of one description share every feature.
    for _ in range(FEATURE_DIM + 10):
        metric.step_update(MotionSample(synthesize_motion(d, 80), d))
    metric.on_round_test_end("Round0")
    assert np.isnan(metric.round_scores[0])
    with open(logger.dump_path, encoding="utf-8") as fin:
        assert "FID of Round0 is undefined" in fin.read()


def test_diversity_ignores_sample_order(rng):
    feats = rng.standard_normal((30, 5))
    assert diversity(feats, pairs=100) == diversity(feats[rng.permutation(30)], pairs=100)
    assert diversity(np.ones((10, 5)), pairs=20) == 0.0
    with pytest.raises(InvalidInputError):
        diversity(feats[:5], pairs=11)
    with pytest.raises(InvalidInputError):
        diversity(feats[:1], pairs=1)


def test_multimodality_grows_with_noise():
    def generate(d, count, seed):
        return noisy_motions(d.to_text(), count, seed)

    descriptions = [desc("direction:+x"), desc("bounce:hop")]
    value = multimodality(generate, descriptions, draws_per_desc=8, subset=4)
    assert value > 0
    assert multimodality(generate, descriptions, draws_per_desc=8, subset=4) == value

    clean = {"a": feature_matrix([synthesize_motion(desc("direction:+x"), 80)] * 4)}
    assert multimodality_from_groups(clean, subset=2) == 0.0
    with pytest.raises(InvalidInputError):
        multimodality_from_groups({"a": np.zeros((1, FEATURE_DIM))})
    with pytest.raises(InvalidInputError):
        multimodality(generate, descriptions, draws_per_desc=1)


def test_mm_distance_of_ground_truth_is_zero():
    d = desc("direction:circle right-limb:wave")
    assert mm_distance(synthesize_motion(d, 100), d) == pytest.approx(0.0, abs=1e-9)
    assert mm_distance(synthesize_motion(d, 100), desc("direction:-y")) > 0.1


def test_smoothness_metrics():
    frames = np.zeros((20, 6))
    frames[:, 0] = 0.1 * np.arange(20)
    assert transition_distance(frames) == pytest.approx(0.1)
    assert jerk_metric(frames) == pytest.approx(0.0, abs=1e-12)

    wrapping = np.zeros((3, 6))
    wrapping[:, 2] = [np.pi - 0.01, -np.pi + 0.01, -np.pi + 0.03]
    assert transition_distance(wrapping) == pytest.approx(0.02)
    with pytest.raises(InvalidInputError):
        jerk_metric(frames[:2])


def test_features_are_stationary_for_the_empty_description():
    feats = motion_features(synthesize_motion(ConceptDescription(), 60))
    assert feats.shape == (FEATURE_DIM,)
    assert np.allclose(feats, 0.0)
    assert feature_matrix([]).shape == (0, FEATURE_DIM)


def test_concept_recall_on_ground_truth():
    texts = ["direction:+x", "left-limb:raise bounce:hop", "direction:circle right-limb:wave"]
    report = concept_recall([(synthesize_motion(desc(t), 120), desc(t)) for t in texts])
    assert report.hit_rate == 1.0 and report.count == 3
    assert report.per_token_count == {1: 1.0, 2: 1.0}
    assert set(report.per_family) == {"direction", "left-limb", "right-limb", "bounce"}

    mismatched = concept_recall([
        (synthesize_motion(desc("direction:+x"), 120), desc("bounce:hop")),
        (synthesize_motion(desc("direction:+x"), 120), ConceptDescription()),
    ])
    assert mismatched.hit_rate == 0.5 and mismatched.per_family == {"bounce": 0.0}
    with pytest.raises(InvalidInputError):
        concept_recall([])


def test_bootstrap_intervals(rng):
    values = rng.normal(2.0, 1.0, size=200)
    ci = bootstrap_ci(values, seed=1)
    assert ci.low <= ci.estimate <= ci.high and ci.low < 2.0 < ci.high
    assert bootstrap_ci(values, seed=1) == ci

    diff = bootstrap_diff_ci(values + 1.0, values, seed=1)
    assert diff.estimate == pytest.approx(1.0) and 0 < diff.low < 1.0 < diff.high
    with pytest.raises(InvalidInputError):
        bootstrap_ci(values[:1])


def test_evaluator_reports_and_dumps(tmp_path, logger):
    config = {
        "metrics": ["ConceptRecall", "Diversity", "MMDistance"],
        "custom_metrics": [{"module_path": "motioncompose.evaluation.metrics.smoothness", "class_name": "Jerk"}],
    }
    evaluator = Evaluator(config, num_rounds=2, num_data=4, log_dir=str(tmp_path), main_logger=logger, name="unit")
    assert evaluator.metric_names == ["ConceptRecall", "Diversity", "MMDist", "Jerk"]

    for round_idx, text in enumerate(["direction:+y", "left-limb:wave"]):
        evaluator.on_round_test_start(f"Round{round_idx}")
        for motion in noisy_motions(text, 4, seed=10 * round_idx, length=100):
            evaluator.update_round_metrics(MotionSample(motion, desc(text)))
        evaluator.on_round_test_end(f"Round{round_idx}")
    report = evaluator.on_test_end()

    assert report["metrics"]["MMDist"]["lower_is_better"] and len(report["metrics"]["Jerk"]["rounds"]) == 2
    assert 0.0 <= report["metrics"]["ConceptRecall"]["mean"] <= 1.0
    df = pd.read_csv(os.path.join(str(tmp_path), "Evaluator unit_metrics.csv"))
    assert list(df["Round"]) == ["1", "2", "Average"]
    with open(os.path.join(str(tmp_path), "Evaluator unit_report.json")) as fin:
        assert json.load(fin)["num_rounds"] == 2


def test_evaluator_rejects_unknown_metrics(tmp_path):
    with pytest.raises(AssertionError):
        Evaluator({"metrics": ["Perplexity"]}, 1, 1, str(tmp_path))


def quadratic_score(z: np.ndarray, t: int) -> np.ndarray:
    return z


def test_energy_grid_of_a_quadratic(tmp_path):
    plane = coordinate_plane(np.zeros((2, 3)), (0, 1), (1, 2))
    grid = energy_grid(quadratic_score, plane, t=5, resolution=(5, 7), extent=2.0, smoothing=0.0)
    xx, yy = np.meshgrid(grid.x_values, grid.y_values)
    assert grid.values.shape == (5, 7)
    assert np.allclose(grid.values, xx ** 2 + yy ** 2)
    assert grid.metadata["t"] == 5

    serial = energy_grid(quadratic_score, plane, 5, (5, 7), 2.0, smoothing=1.0, num_parallel=1)
    parallel = energy_grid(quadratic_score, plane, 5, (5, 7), 2.0, smoothing=1.0, num_parallel=4)
    assert np.array_equal(serial.values, parallel.values)

    path = str(tmp_path / "grid.csv")
    save_grid_csv(serial, path)
    loaded = load_grid_csv(path)
    assert np.array_equal(loaded.values, serial.values)
    assert np.array_equal(loaded.x_values, serial.x_values) and np.array_equal(loaded.y_values, serial.y_values)


def test_grid_validation_and_correlation(rng):
    a = EnergyGrid(rng.random((4, 4)), np.arange(4), np.arange(4))
    assert grid_correlation(a, a) == pytest.approx(1.0)
    assert grid_correlation(a, EnergyGrid(-a.values, a.x_values, a.y_values)) == pytest.approx(-1.0)
    with pytest.raises(InvalidInputError):
        grid_correlation(a, EnergyGrid(np.ones((4, 4)), a.x_values, a.y_values))
    with pytest.raises(ShapeError):
        EnergyGrid(np.ones((3, 4)), np.arange(3), np.arange(4))
    with pytest.raises(InvalidInputError):
        EnergyGrid(np.full((2, 2), np.inf), np.arange(2), np.arange(2))
    with pytest.raises(InvalidInputError):
        energy_grid(quadratic_score, coordinate_plane(np.zeros(3), (0,), (1,)), 0, resolution=(1, 5))
    with pytest.raises(InvalidInputError):
        coordinate_plane(np.zeros(3), (1,), (1,))


def test_pca_plane_spans_the_visited_points(rng):
    u, v = np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0, 0.0])
    points = [3.0 * a * u + 0.5 * b * v for a, b in rng.standard_normal((20, 2))]
    plane = pca_plane(np.zeros(4), points)
    assert np.allclose(plane.u, u, atol=1e-8) and np.allclose(plane.v, v, atol=1e-8)
    with pytest.raises(ShapeError):
        pca_plane(np.zeros(4), points[:2])


def test_frechet_matches_closed_form_on_sampled_gaussians(rng):
    cov_a = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 0.5]])
    cov_b = np.diag([1.0, 1.5, 0.8])
    mu_a, mu_b = np.array([0.5, -1.0, 0.0]), np.array([-0.5, 0.0, 1.0])
    a = rng.multivariate_normal(mu_a, cov_a, size=10000)
    b = rng.multivariate_normal(mu_b, cov_b, size=10000)
    expected = frechet_from_moments(mu_a, cov_a, mu_b, cov_b)
    assert abs(frechet_distance(a, b) - expected) <= 0.1 * expected


def test_set_metrics_match_brute_force_loops(rng):
    feats = rng.standard_normal((12, 5))
    pairs = 20
    value = diversity(feats, pairs=pairs, seed=3)

    ordered = feats[np.lexsort(feats.T[::-1])]
    first, second = diversity_pairs(12, pairs, seed=3)
    total = 0.0
    for i, j in zip(first, second):
        total += np.sqrt(np.sum((ordered[i] - ordered[j]) ** 2))
    assert abs(value - total / pairs) <= 1e-12

    groups = {"a": feats[:6], "b": feats[6:]}
    expected = []
    for name in ("a", "b"):
        ordered = groups[name][np.lexsort(groups[name].T[::-1])]
        left, right = subset_pairs(6, 2, 0, name)
        expected.append(np.mean([np.sqrt(np.sum((ordered[i] - ordered[j]) ** 2)) for i, j in zip(left, right)]))
    assert abs(multimodality_from_groups(groups, subset=2) - np.mean(expected)) <= 1e-12


def test_smoothness_metrics_match_naive_loops(rng):
    frames = rng.standard_normal((30, 6))
    frames[:, 2:5] = np.mod(frames[:, 2:5] * 3, 2 * np.pi) - np.pi

    def step(a, b):
        d = b - a
        d[2:5] = np.arctan2(np.sin(d[2:5]), np.cos(d[2:5]))
        return d

    steps = [step(frames[i], frames[i + 1]) for i in range(29)]
    naive_transition = sum(np.sqrt(np.sum(s ** 2)) for s in steps) / 29
    naive_jerk = sum(np.sqrt(np.sum((steps[i + 1] - steps[i]) ** 2)) for i in range(28)) / 28
    assert abs(transition_distance(frames) - naive_transition) <= 1e-12
    assert abs(jerk_metric(frames) - naive_jerk) <= 1e-12
