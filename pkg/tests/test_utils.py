# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import os

import numpy as np
import pytest

from motioncompose.evaluation.energy_grid import EnergyGrid
from motioncompose.evaluation.metrics.base import BaseMetric
from motioncompose.toymotion.common import ConceptDescription
from motioncompose.toymotion.synthesizer import synthesize_motion
from motioncompose.utils.checkpoint import Checkpoint, file_digest, load_checkpoint, save_checkpoint
from motioncompose.utils.config_loader import load_class, load_constant, load_dot_env, load_yaml_config
from motioncompose.utils.errors import CheckpointError, ConfigError
from motioncompose.utils.logger import Logger
from motioncompose.utils.plotting import plot_energy_grid, plot_motion


@pytest.fixture
def checkpoint(rng):
    return Checkpoint(
        kind="latent-denoiser",
        tensors={
            "denoiser.input.weight": rng.standard_normal((4, 8)),
            "denoiser.input.bias": np.zeros(8),
            "scale": np.array(2.5),
            "counts": np.arange(6, dtype=np.int32).reshape(2, 3),
        },
        metadata={"step": 120, "profile": {"name": "tiny"}, "schedule": {"T": 1000, "kind": "linear"}},
    )


def test_checkpoint_save_load_save_is_byte_identical(tmp_path, checkpoint):
    first, second = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
    digest = save_checkpoint(checkpoint, first)
    loaded = load_checkpoint(first, kind="latent-denoiser")
    assert save_checkpoint(loaded, second) == digest == file_digest(second)
    assert loaded.step == 120 and loaded.metadata["schedule"]["T"] == 1000
    for name, tensor in checkpoint.tensors.items():
        assert loaded.tensors[name].dtype == tensor.dtype and np.array_equal(loaded.tensors[name], tensor)


def test_checkpoint_does_not_depend_on_insertion_order(tmp_path, checkpoint):
    reordered = Checkpoint(
        kind=checkpoint.kind, tensors=dict(reversed(list(checkpoint.tensors.items()))),
        metadata=dict(reversed(list(checkpoint.metadata.items()))),
    )
    assert save_checkpoint(checkpoint, str(tmp_path / "a.ckpt")) == save_checkpoint(reordered, str(tmp_path / "b.ckpt"))


def test_checkpoint_errors(tmp_path, checkpoint):
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(checkpoint, path)
    with pytest.raises(CheckpointError):
        load_checkpoint(path, kind="vae")

    with open(path, "rb") as fin:
        data = fin.read()
    for name, corrupt in [("truncated", data[:-3]), ("trailing", data + b"\0"), ("magic", b"XXXX" + data[4:])]:
        bad = str(tmp_path / f"{name}.ckpt")
        with open(bad, "wb") as fout:
            fout.write(corrupt)
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)

    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "missing.ckpt"))
    with pytest.raises(CheckpointError):
        Checkpoint(kind="optimizer", tensors={})
    with pytest.raises(CheckpointError):
        save_checkpoint(Checkpoint(kind="vae", tensors={}, metadata={"bad": object()}), path)


def test_load_yaml_config(tmp_path):
    path = tmp_path / "config.yml"
    path.write_text("seed: 3\ndataset:\n  count: 10\n")
    assert load_yaml_config(str(path)) == {"seed": 3, "dataset": {"count": 10}}
    path.write_text("")
    assert load_yaml_config(str(path)) == {}
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_yaml_config(str(path))
    path.write_text("seed: [1\n")
    with pytest.raises(ConfigError):
        load_yaml_config(str(path))
    with pytest.raises(ConfigError):
        load_yaml_config(str(tmp_path / "missing.yml"))


def test_load_dot_env(tmp_path, monkeypatch):
    monkeypatch.delenv("MOTIONCOMPOSE_TEST_VALUE", raising=False)
    path = tmp_path / ".env"
    path.write_text("MOTIONCOMPOSE_TEST_VALUE=42\n")
    assert load_dot_env(str(path))
    assert os.environ["MOTIONCOMPOSE_TEST_VALUE"] == "42"
    monkeypatch.delenv("MOTIONCOMPOSE_TEST_VALUE")


def test_load_class_checks_the_base_class():
    assert load_class("motioncompose.evaluation.metrics", "Jerk", BaseMetric).name == "Jerk"
    assert load_constant("motioncompose.toymotion.common", "MAX_LENGTH") == 196
    with pytest.raises(AssertionError):
        load_class("motioncompose.toymotion.common", "MotionSequence", BaseMetric)
    with pytest.raises(ConfigError):
        load_constant("motioncompose.no_such_module", "x")
    with pytest.raises(ConfigError):
        load_constant("motioncompose.toymotion.common", "NO_SUCH_NAME")


def test_logger_tags_and_table_dumps(tmp_path):
    logger = Logger(name="unit", dump_folder=str(tmp_path / "logs"))
    logger.info("hello", tag="Sampler")
    logger.debug("details")
    table = Logger(name="unit", dump_folder=str(tmp_path / "logs"), extension_name="csv")
    table.info("step,loss")
    logger.close()
    table.close()

    with open(os.path.join(str(tmp_path), "logs", "unit.log")) as fin:
        lines = fin.read().splitlines()
    assert lines == ["[Sampler] hello", "details"]
    with open(os.path.join(str(tmp_path), "logs", "unit.csv")) as fin:
        assert fin.read() == "step,loss\n"


def test_plots_are_written_as_svg(tmp_path):
    motions = [synthesize_motion(ConceptDescription.from_text(t), 60) for t in ("direction:circle", "bounce:hop")]
    path = plot_motion(motions, str(tmp_path / "plots" / "motions.svg"))
    with open(path) as fin:
        assert "<svg" in fin.read()

    values = np.add.outer(np.linspace(-1, 1, 5) ** 2, np.linspace(-1, 1, 6) ** 2)
    grid = EnergyGrid(values, np.linspace(-1, 1, 6), np.linspace(-1, 1, 5), label="quadratic")
    path = plot_energy_grid(grid, str(tmp_path / "energy.svg"), levels=5)
    assert os.path.getsize(path) > 0
