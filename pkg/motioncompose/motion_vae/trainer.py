# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import jsonlines
import numpy as np
from tqdm import tqdm

from motioncompose.motion_vae.loss import DEFAULT_KL_WEIGHT, smooth_l1, vae_loss
from motioncompose.motion_vae.model import MotionVAE
from motioncompose.numerics.functional import wrap_angle
from motioncompose.numerics.optimizer import AdamW, OptimizerConfig
from motioncompose.numerics.rng import make_rng
from motioncompose.toymotion.common import ANGLE_CHANNELS, CHANNEL_NAMES, pad_frames
from motioncompose.toymotion.dataset import MotionRecord, channel_statistics
from motioncompose.utils.errors import InvalidInputError, TrainingFailureError
from motioncompose.utils.logger import Logger


@dataclass
class VaeTrainConfig:
    steps: int = 3000
    batch_size: int = 32
    kl_weight: float = DEFAULT_KL_WEIGHT
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(lr=1e-4, final_lr=1e-5, stage_steps=2400))
    log_every: int = 50
    # Number of records used to estimate the latent scale after training.
    latent_scale_records: int = 512
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 1 or self.batch_size < 1:
            raise InvalidInputError(f"steps and batch_size should be positive but got {self.steps}, {self.batch_size}")


def _batch_frames(model: MotionVAE, records: List[MotionRecord], indices: np.ndarray):
    frames, mask = pad_frames([records[idx].motion.frames.astype(np.float64) for idx in indices])
    return model.normalize(frames), mask


def train_vae(
    records: List[MotionRecord], config: VaeTrainConfig, model: MotionVAE, logger: Optional[Logger] = None,
    log_path: Optional[str] = None, show_progress: bool = True, batch_rng: Optional[np.random.Generator] = None,
) -> List[dict]:
    """Trains `model` in place and returns the per-step training log. `batch_rng` (advanced in place) picks batches."""
    if len(records) == 0:
        raise InvalidInputError("Cannot train the VAE on an empty dataset")

    mean, std = channel_statistics(records)
    model.set_normalization(mean, std)
    optimizer = AdamW(model.store, config.optimizer)
    batch_rng = make_rng(config.seed, "vae", "batches") if batch_rng is None else batch_rng

    history: List[dict] = []
    fout = jsonlines.open(log_path, "w") if log_path is not None else None
    pbar = tqdm(range(config.steps), desc="[VAE] training", disable=not show_progress)
    for step in pbar:
        indices = batch_rng.choice(len(records), size=min(config.batch_size, len(records)), replace=False)
        frames, mask = _batch_frames(model, records, indices)

        posterior, enc_cache = model.encode_batch(frames, mask)
        eps = make_rng(config.seed, "vae", "noise", step).standard_normal(posterior.mean.shape)
        std_z = posterior.std
        z = posterior.mean + std_z * eps
        recon, dec_cache = model.decode_batch(z, frames.shape[1], mask)

        loss = vae_loss(frames, recon, posterior, config.kl_weight, mask)
        if not np.isfinite(loss.total):
            raise TrainingFailureError(f"VAE loss became {loss.total}", step=step)

        model.store.zero_grad()
        g_z = model.backward_decoder(loss.grad_recon, dec_cache)
        model.backward_encoder(
            g_z + loss.grad_mean, g_z * eps * 0.5 * std_z + loss.grad_log_variance, enc_cache,
        )
        grad_norm = optimizer.step()

        record = {
            "step": step, "loss": loss.total, "reconstruction": loss.reconstruction, "kl": loss.kl,
            "lr": optimizer.learning_rate(step), "grad_norm": grad_norm,
        }
        history.append(record)
        if fout is not None:
            fout.write(record)
        if step % config.log_every == 0:
            pbar.set_postfix(loss=f"{loss.total:.4f}", kl=f"{loss.kl:.3f}")
            if logger is not None:
                logger.debug(f"step {step}: loss={loss.total:.6f} recon={loss.reconstruction:.6f} kl={loss.kl:.4f}", tag="VAE")

    if fout is not None:
        fout.close()

    scale = fit_latent_scale(model, records[:config.latent_scale_records])
    model.set_latent_scale(scale)
    if logger is not None:
        logger.info(f"Finished {config.steps} steps, final loss {history[-1]['loss']:.6f}, latent scale {scale:.4f}", tag="VAE")
    return history


def encode_means(model: MotionVAE, records: List[MotionRecord], batch_size: int = 64) -> np.ndarray:
    """Posterior means (count, N, d) of the given records."""
    means = []
    for start in range(0, len(records), batch_size):
        frames, mask = _batch_frames(model, records, np.arange(start, min(start + batch_size, len(records))))
        posterior, _ = model.encode_batch(frames, mask)
        means.append(posterior.mean)
    return np.concatenate(means, axis=0)


def fit_latent_scale(model: MotionVAE, records: List[MotionRecord]) -> float:
    if len(records) == 0:
        return 1.0
    std = float(np.std(encode_means(model, records)))
    return 1.0 / max(std, 1e-6)


def reconstruction_report(model: MotionVAE, records: List[MotionRecord]) -> Dict[str, float]:
    """Masked smooth-L1 reconstruction error per channel, in data units, from decode(encode(m).mean).

    Angle channels are compared on the circle.
    """
    totals = np.zeros(len(CHANNEL_NAMES))
    count = 0
    for record in records:
        recon = model.reconstruct(record.motion).frames
        diff = recon - record.motion.frames.astype(np.float64)
        diff[:, list(ANGLE_CHANNELS)] = wrap_angle(diff[:, list(ANGLE_CHANNELS)])
        value, _ = smooth_l1(diff)
        totals += value.sum(axis=0)
        count += len(diff)
    return {name: float(total / max(count, 1)) for name, total in zip(CHANNEL_NAMES, totals)}
