# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import copy
import dataclasses
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import dacite
import numpy as np
import yaml

from motioncompose.common import PROFILES, ModelProfile
from motioncompose.composer.common import DEFAULT_LAMBDAS, DEFAULT_LENGTH
from motioncompose.denoiser.energy_attention import MULTI_CONCEPT_AGD, AgdConfig
from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.sampler import SamplerConfig
from motioncompose.diffusion.schedule import NoiseSchedule, make_schedule
from motioncompose.diffusion.trainer import DiffusionExamples, DiffusionTrainConfig
from motioncompose.evaluation.evaluator import DEFAULT_METRICS
from motioncompose.motion_vae.model import MotionVAE
from motioncompose.motion_vae.trainer import VaeTrainConfig, encode_means
from motioncompose.numerics.rng import make_rng, rng_state
from motioncompose.toymotion.dataset import DatasetConfig, MotionRecord, channel_statistics
from motioncompose.utils.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from motioncompose.utils.config_loader import load_yaml_config
from motioncompose.utils.errors import CheckpointError, ConfigError, InvalidInputError, MotionComposeError
from motioncompose.utils.logger import Logger


PRECISIONS = ("float32", "float64")


##### Run config schema #####

@dataclass
class DatasetSection:
    path: str = "data/train.tmot"
    # Held-out set used for VAE reconstruction reports.
    eval_path: str = "data/eval.tmot"
    eval_count: int = 200
    generator: DatasetConfig = field(default_factory=DatasetConfig)


@dataclass
class VaeSection:
    checkpoint: str = "checkpoints/vae.ckpt"
    train: VaeTrainConfig = field(default_factory=VaeTrainConfig)


@dataclass
class ScheduleConfig:
    T: int = 1000
    kind: str = "linear"
    beta_min: float = 1e-4
    beta_max: float = 0.02


@dataclass
class DiffusionSection:
    substrate: str = "latent"
    checkpoint: str = "checkpoints/denoiser.ckpt"
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    train: DiffusionTrainConfig = field(default_factory=DiffusionTrainConfig)


@dataclass
class CompositionDefaults:
    lambdas: Tuple[float, float, float] = DEFAULT_LAMBDAS
    agd: AgdConfig = field(default_factory=lambda: dataclasses.replace(MULTI_CONCEPT_AGD))
    length: int = DEFAULT_LENGTH


@dataclass
class CustomMetricConfig:
    module_path: str
    class_name: str


@dataclass
class EvaluationConfig:
    # "single": one description per draw group, plain guidance; "conjunction": two-token descriptions generated
    # by composing their tokens; "negation": "A and not B" specs scored on the suppression of B.
    protocol: str = "single"
    num_descriptions: int = 20
    draws_per_description: int = 10
    min_tokens: int = 1
    max_tokens: int = 1
    rounds: int = 1
    length: int = DEFAULT_LENGTH
    metrics: List[str] = field(default_factory=lambda: list(DEFAULT_METRICS))
    # Metrics outside the package, loaded by module_path/class_name and appended after `metrics`.
    custom_metrics: List[CustomMetricConfig] = field(default_factory=list)
    diversity_pairs: int = 300
    multimodality_subset: int = 10
    # Noise of the ground-truth reference set the Fréchet distance compares against.
    reference_noise: float = 0.05
    num_parallel: int = 4
    output_dir: str = "eval"

    def __post_init__(self) -> None:
        if self.protocol not in ("single", "conjunction", "negation"):
            raise InvalidInputError(f"Unknown evaluation protocol {self.protocol}")
        if self.draws_per_description < 2:
            raise InvalidInputError(f"draws_per_description should be at least 2 but {self.draws_per_description} was given")
        if min(self.num_descriptions, self.rounds, self.num_parallel) < 1:
            raise InvalidInputError("num_descriptions, rounds and num_parallel should be positive")


@dataclass
class AugmentConfig:
    count: int = 500
    min_tokens: int = 2
    max_tokens: int = 3
    output_dataset: str = "data/augmented.tmot"
    output_checkpoint: str = "checkpoints/denoiser_augmented.ckpt"
    finetune_steps: int = 1000
    # Samples per single-concept description in the before/after recall check.
    eval_draws: int = 10
    num_parallel: int = 4

    def __post_init__(self) -> None:
        if self.count < 0:
            raise InvalidInputError(f"count should not be negative but {self.count} was given")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise InvalidInputError(f"Invalid token count range [{self.min_tokens}, {self.max_tokens}]")
        if min(self.finetune_steps, self.eval_draws, self.num_parallel) < 1:
            raise InvalidInputError("finetune_steps, eval_draws and num_parallel should be positive")


@dataclass
class VizConfig:
    t: int = 500
    plane: str = "coords"
    coordinates: List[List[int]] = field(default_factory=lambda: [[0, 0], [0, 1]])
    resolution: Tuple[int, int] = (41, 41)
    extent: float = 3.0
    smoothing: float = 1.0
    num_parallel: int = 4
    output_dir: str = "viz"

    def __post_init__(self) -> None:
        if self.plane not in ("coords", "pca"):
            raise InvalidInputError(f"Unknown plane {self.plane}, choose from ('coords', 'pca')")
        if len(self.coordinates) != 2:
            raise InvalidInputError(f"Need exactly two coordinates but got {self.coordinates}")


@dataclass
class RunConfig:
    experiment_name: str = "motioncompose"
    log_dir: str = "logs"
    seed: int = 0
    precision: str = "float64"
    profile: ModelProfile = field(default_factory=lambda: dataclasses.replace(PROFILES["desk"]))
    dataset: DatasetSection = field(default_factory=DatasetSection)
    vae: VaeSection = field(default_factory=VaeSection)
    diffusion: DiffusionSection = field(default_factory=DiffusionSection)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    composition: CompositionDefaults = field(default_factory=CompositionDefaults)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    viz: VizConfig = field(default_factory=VizConfig)

    def __post_init__(self) -> None:
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision should be one of {PRECISIONS} but {self.precision} was given")
        if self.sampler.substrate != self.diffusion.substrate:
            raise ConfigError(
                f"sampler.substrate ({self.sampler.substrate}) differs from diffusion.substrate ({self.diffusion.substrate})"
            )


DACITE_CONFIG = dacite.Config(strict=True, cast=[Enum, tuple, float])


def _resolve_profile(data: dict) -> dict:
    """`profile` may be a profile name or a mapping whose `name` picks the base profile to override."""
    profile = data.get("profile")
    if profile is None:
        return data
    if isinstance(profile, str):
        profile = {"name": profile}
    if not isinstance(profile, dict):
        raise ConfigError(f"profile should be a name or a mapping but {profile!r} was given")
    name = profile.get("name", "desk")
    if name not in PROFILES:
        raise ConfigError(f"Unknown profile {name}, choose from {sorted(PROFILES)}")
    data = dict(data)
    data["profile"] = {**dataclasses.asdict(PROFILES[name]), **profile}
    return data


def run_config_from_dict(data: dict) -> RunConfig:
    try:
        return dacite.from_dict(RunConfig, _resolve_profile(data or {}), config=DACITE_CONFIG)
    except dacite.UnexpectedDataError as e:
        raise ConfigError(f"Unknown config keys: {sorted(e.keys)}")
    except dacite.DaciteError as e:
        raise ConfigError(f"Invalid config: {e}")
    except ValueError as e:
        raise ConfigError(f"Invalid config value: {e}")


def load_run_config(config_path: Optional[str], seed: Optional[int] = None) -> RunConfig:
    """Load and validate a run config; a command-line `seed` overrides the file and every section seed."""
    data = load_yaml_config(config_path) if config_path is not None else {}
    config = run_config_from_dict(data)
    if seed is not None:
        config = override_seed(config, seed)
    return config


def override_seed(config: RunConfig, seed: int) -> RunConfig:
    config = copy.deepcopy(config)
    config.seed = seed
    config.dataset.generator.seed = seed
    config.vae.train.seed = seed
    config.diffusion.train.seed = seed
    config.sampler.seed = seed
    return config


def config_to_dict(config) -> dict:
    def _plain(value):
        if isinstance(value, Enum):
            return value.value
        if isinstance(value, (list, tuple)):
            return [_plain(v) for v in value]
        if isinstance(value, dict):
            return {k: _plain(v) for k, v in value.items()}
        return value

    return _plain(dataclasses.asdict(config))


def dump_config(config) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)


def make_noise_schedule(config: RunConfig) -> NoiseSchedule:
    cfg = config.diffusion.schedule
    return make_schedule(cfg.T, cfg.kind, cfg.beta_min, cfg.beta_max)


##### Model persistence #####

def save_vae(vae: MotionVAE, path: str, config: RunConfig, step: int = 0, rng: np.random.Generator = None) -> str:
    metadata = {
        "profile": dataclasses.asdict(vae.profile),
        "dtype": str(vae.store.dtype),
        "seed": vae.store.seed,
        "step": int(step),
        "rng_state": rng_state(rng) if rng is not None else None,
        "config": config_to_dict(config),
    }
    return save_checkpoint(Checkpoint(kind="vae", tensors=vae.store.state_dict(), metadata=metadata), path)


def load_vae(path: str) -> MotionVAE:
    ckpt = load_checkpoint(path, kind="vae")
    try:
        vae = MotionVAE(ModelProfile(**ckpt.metadata["profile"]), seed=ckpt.metadata["seed"], dtype=ckpt.metadata["dtype"])
        vae.store.load_state_dict(ckpt.tensors)
    except (KeyError, TypeError, MotionComposeError) as e:
        raise CheckpointError(f"Checkpoint {path} does not match the VAE: {e}")
    return vae


def denoiser_kind(substrate: str) -> str:
    return f"{substrate}-denoiser"


def save_denoiser(
    denoiser: Denoiser, path: str, config: RunConfig, step: int = 0, rng: np.random.Generator = None,
    extra: Optional[dict] = None,
) -> str:
    metadata = {
        "profile": dataclasses.asdict(denoiser.profile),
        "substrate": denoiser.substrate,
        "num_steps": denoiser.num_steps,
        "schedule": dataclasses.asdict(config.diffusion.schedule),
        "dtype": str(denoiser.store.dtype),
        "seed": denoiser.store.seed,
        "step": int(step),
        "rng_state": rng_state(rng) if rng is not None else None,
        "config": config_to_dict(config),
    }
    metadata.update(extra or {})
    ckpt = Checkpoint(kind=denoiser_kind(denoiser.substrate), tensors=denoiser.store.state_dict(), metadata=metadata)
    return save_checkpoint(ckpt, path)


def checkpoint_schedule(ckpt: Checkpoint) -> NoiseSchedule:
    """The noise schedule the denoiser in `ckpt` was trained with."""
    try:
        schedule = ScheduleConfig(**ckpt.metadata["schedule"])
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"Checkpoint has no usable schedule: {e}")
    return make_schedule(schedule.T, schedule.kind, schedule.beta_min, schedule.beta_max)


def load_denoiser(path: str) -> Tuple[Denoiser, Checkpoint]:
    ckpt = load_checkpoint(path)
    if ckpt.kind not in ("latent-denoiser", "sequence-denoiser"):
        raise CheckpointError(f"{path} holds a {ckpt.kind} checkpoint, not a denoiser")
    meta = ckpt.metadata
    try:
        denoiser = Denoiser(
            ModelProfile(**meta["profile"]), substrate=meta["substrate"], num_steps=meta["num_steps"],
            seed=meta["seed"], dtype=meta["dtype"], initialize=False,
        )
        denoiser.load_state_dict(ckpt.tensors)
    except (KeyError, TypeError, MotionComposeError) as e:
        raise CheckpointError(f"Checkpoint {path} does not match the denoiser: {e}")
    return denoiser, ckpt


##### Training examples #####

def build_examples(
    records: List[MotionRecord], denoiser: Denoiser, vae: Optional[MotionVAE] = None, fit_normalization: bool = True,
) -> DiffusionExamples:
    """Clean inputs x_0 for the denoiser: scaled posterior means (latent) or normalized frames (sequence)."""
    descriptions = [record.description for record in records]
    if denoiser.substrate == "latent":
        if vae is None:
            raise InvalidInputError("The latent substrate needs a trained VAE")
        means = encode_means(vae, records) * vae.latent_scale
        return DiffusionExamples(list(means), descriptions)

    if fit_normalization:
        denoiser.set_normalization(*channel_statistics(records))
    tokens = [denoiser.normalize(record.motion.frames.astype(np.float64)) for record in records]
    return DiffusionExamples(tokens, descriptions)


##### Workflow base #####

class BaseWorkflow:
    """Shared setup: logger, resolved-config echo and the run's RNG streams."""
    name: str = "workflow"

    def __init__(self, config: RunConfig) -> None:
        self._config: RunConfig = config

        self._init_logger()

        self._log_resolved_config()

    def _init_logger(self) -> None:
        self._logger: Logger = Logger(
            name=f"{self._config.experiment_name}.{self.name}",
            dump_folder=self._config.log_dir,
        )

    @property
    def logger(self) -> Logger:
        return self._logger

    def _log_resolved_config(self) -> None:
        self._logger.info(f"seed={self._config.seed}\n{dump_config(self._config)}", tag=self.name)
        return

    def _rng(self, *names) -> np.random.Generator:
        return make_rng(self._config.seed, self.name, *names)

    def _path(self, *parts: str) -> str:
        path = os.path.join(*parts)
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        return path

    def run(self) -> Dict:
        raise NotImplementedError

    def close(self) -> None:
        self._logger.close()
