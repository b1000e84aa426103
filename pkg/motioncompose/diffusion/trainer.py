# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import jsonlines
import numpy as np
from tqdm import tqdm

from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.schedule import NoiseSchedule, q_sample
from motioncompose.numerics.optimizer import AdamW, OptimizerConfig
from motioncompose.numerics.rng import make_rng
from motioncompose.toymotion.common import ConceptDescription, pad_frames
from motioncompose.utils.errors import InvalidInputError, TrainingFailureError
from motioncompose.utils.logger import Logger


DEFAULT_UNCOND_RATE: float = 0.1

# predictor(x_t, step_indices, noise) -> ε̂, replaces the network (no gradients are computed).
Predictor = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class DiffusionTrainConfig:
    steps: int = 4000
    batch_size: int = 64
    uncond_rate: float = DEFAULT_UNCOND_RATE
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(lr=1e-4, final_lr=1e-5, stage_steps=3200))
    log_every: int = 50
    seed: int = 0
    # Learning rate multiplier applied by `finetune`.
    finetune_lr_scale: float = 0.1

    def __post_init__(self) -> None:
        if self.steps < 1 or self.batch_size < 1:
            raise InvalidInputError(f"steps and batch_size should be positive but got {self.steps}, {self.batch_size}")
        if not 0 < self.finetune_lr_scale <= 1:
            raise InvalidInputError(f"finetune_lr_scale should be in (0, 1] but {self.finetune_lr_scale} was given")


@dataclass
class DiffusionExamples:
    """Clean training inputs x_0 (latent codes or normalized frames) paired with their descriptions."""
    tokens: List[np.ndarray]
    descriptions: List[ConceptDescription]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.descriptions):
            raise InvalidInputError(f"{len(self.tokens)} examples but {len(self.descriptions)} descriptions")

    def __len__(self) -> int:
        return len(self.tokens)

    def batch(self, indices: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray], List[ConceptDescription]]:
        x0, mask = pad_frames([self.tokens[idx] for idx in indices])
        return x0, (None if mask.all() else mask), [self.descriptions[idx] for idx in indices]

    def extend(self, other: "DiffusionExamples") -> "DiffusionExamples":
        return DiffusionExamples(self.tokens + other.tokens, self.descriptions + other.descriptions)


def training_step(
    denoiser: Denoiser, x0: np.ndarray, descs: List[ConceptDescription], schedule: NoiseSchedule,
    rng: np.random.Generator, uncond_rate: float = DEFAULT_UNCOND_RATE, mask: Optional[np.ndarray] = None,
    predictor: Optional[Predictor] = None,
) -> float:
    """Mean squared ε-prediction error over valid entries; gradients are accumulated into the (zeroed) store."""
    if not 0 <= uncond_rate <= 1:
        raise InvalidInputError(f"uncond_rate should be in [0, 1] but {uncond_rate} was given")

    batch = x0.shape[0]
    t = rng.integers(1, schedule.T + 1, size=batch)
    noise = rng.standard_normal(x0.shape)
    drop = rng.random(batch) < uncond_rate
    x_t = q_sample(x0, t, noise, schedule)
    steps = t - 1

    valid = np.ones(x0.shape[:-1], dtype=bool) if mask is None else mask
    count = int(valid.sum()) * x0.shape[-1]

    if predictor is not None:
        eps_hat = predictor(x_t, steps, noise)
        diff = np.where(valid[..., None], eps_hat - noise, 0.0)
        return float(np.sum(diff * diff) / count)

    denoiser.store.zero_grad()
    c, c_mask, c_cache = denoiser.embedder.embed_batch(descs, drop)
    eps_hat, cache = denoiser.forward(x_t.astype(denoiser.store.dtype), steps, c, c_mask, mask)
    diff = np.where(valid[..., None], eps_hat - noise, 0.0)
    loss = float(np.sum(diff * diff) / count)
    if not np.isfinite(loss):
        return loss

    g_c = denoiser.backward(2.0 * diff / count, cache)
    denoiser.embedder.backward(np.where(c_mask[..., None], g_c, 0.0), c_cache)
    return loss


def train_diffusion(
    denoiser: Denoiser, examples: DiffusionExamples, schedule: NoiseSchedule, config: DiffusionTrainConfig,
    logger: Optional[Logger] = None, log_path: Optional[str] = None, show_progress: bool = True,
    stream: str = "train", rng: Optional[np.random.Generator] = None,
) -> List[dict]:
    """Trains `denoiser` in place; returns the per-step log. `rng` (advanced in place) drives batches and noise."""
    if len(examples) == 0:
        raise InvalidInputError("Cannot train the denoiser on an empty dataset")

    optimizer = AdamW(denoiser.store, config.optimizer)
    rng = make_rng(config.seed, "diffusion", stream) if rng is None else rng
    denoiser.installed = True

    history: List[dict] = []
    fout = jsonlines.open(log_path, "w") if log_path is not None else None
    pbar = tqdm(range(config.steps), desc=f"[Diffusion] {stream}", disable=not show_progress)
    for step in pbar:
        indices = rng.choice(len(examples), size=min(config.batch_size, len(examples)), replace=False)
        x0, mask, descs = examples.batch(indices)
        loss = training_step(denoiser, x0, descs, schedule, rng, config.uncond_rate, mask)
        if not np.isfinite(loss):
            raise TrainingFailureError(f"Diffusion loss became {loss}", step=step)
        grad_norm = optimizer.step()

        record = {"step": step, "loss": loss, "lr": optimizer.learning_rate(step), "grad_norm": grad_norm}
        history.append(record)
        if fout is not None:
            fout.write(record)
        if step % config.log_every == 0:
            pbar.set_postfix(loss=f"{loss:.4f}")
            if logger is not None:
                logger.debug(f"step {step}: loss={loss:.6f} grad_norm={grad_norm:.4f}", tag="Diffusion")

    if fout is not None:
        fout.close()
    if logger is not None:
        logger.info(f"Finished {config.steps} {stream} steps, final loss {history[-1]['loss']:.6f}", tag="Diffusion")
    return history


def finetune(
    denoiser: Denoiser, examples: DiffusionExamples, schedule: NoiseSchedule, config: DiffusionTrainConfig,
    logger: Optional[Logger] = None, log_path: Optional[str] = None, show_progress: bool = True,
    rng: Optional[np.random.Generator] = None,
) -> List[dict]:
    """Continue training with both learning-rate stages scaled by `finetune_lr_scale`."""
    scaled = dataclasses.replace(
        config.optimizer,
        lr=config.optimizer.lr * config.finetune_lr_scale,
        final_lr=config.optimizer.final_lr * config.finetune_lr_scale,
    )
    return train_diffusion(
        denoiser, examples, schedule, dataclasses.replace(config, optimizer=scaled), logger, log_path,
        show_progress, stream="finetune", rng=rng,
    )


def eps_mse(
    denoiser: Denoiser, examples: DiffusionExamples, schedule: NoiseSchedule, seed: int = 0, batch_size: int = 64,
) -> float:
    """Held-out ε-prediction MSE with conditioning always on."""
    rng = make_rng(seed, "diffusion", "eval")
    total, count = 0.0, 0
    for start in range(0, len(examples), batch_size):
        x0, mask, descs = examples.batch(np.arange(start, min(start + batch_size, len(examples))))
        t = rng.integers(1, schedule.T + 1, size=len(descs))
        noise = rng.standard_normal(x0.shape)
        c, c_mask, _ = denoiser.embedder.embed_batch(descs)
        eps_hat, _ = denoiser.forward(q_sample(x0, t, noise, schedule), t - 1, c, c_mask, mask)
        valid = np.ones(x0.shape[:-1], dtype=bool) if mask is None else mask
        diff = np.where(valid[..., None], eps_hat - noise, 0.0)
        total += float(np.sum(diff * diff))
        count += int(valid.sum()) * x0.shape[-1]
    return total / max(count, 1)
