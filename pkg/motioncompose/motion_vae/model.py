# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from motioncompose.common import ModelProfile
from motioncompose.numerics.functional import check_finite, wrap_angle
from motioncompose.numerics.layers import Cache, LayerNorm, Linear, TransformerBlock
from motioncompose.numerics.param_store import ParamStore
from motioncompose.numerics.rng import SeedLike, make_rng
from motioncompose.toymotion.common import ANGLE_CHANNELS, MOTION_DIM, MotionSequence, check_length, pad_frames
from motioncompose.utils.errors import ShapeError


LOG_VARIANCE_MIN: float = -20.0
LOG_VARIANCE_MAX: float = 10.0
POSITION_INIT_SCALE: float = 0.02


@dataclass
class GaussianPosterior:
    mean: np.ndarray
    log_variance: np.ndarray

    def __post_init__(self) -> None:
        if self.mean.shape != self.log_variance.shape:
            raise ShapeError(f"Mean {self.mean.shape} and log-variance {self.log_variance.shape} differ in shape")

    @property
    def std(self) -> np.ndarray:
        return np.exp(0.5 * self.log_variance)


def reparameterize(p: GaussianPosterior, seed: SeedLike) -> np.ndarray:
    """z = mean + exp(½ log_variance) ⊙ ε with ε drawn from `seed`."""
    eps = make_rng(seed, "reparameterize").standard_normal(p.mean.shape)
    return p.mean + p.std * eps


class MotionVAE:
    """Transformer VAE: L×d_m frames -> N×d Gaussian latent -> L×d_m frames.

    The encoder prepends 2N learned distribution tokens to the projected frames; after the encoder stack the first
    N tokens give the posterior mean and the last N its log-variance. The decoder cross-attends L learned query
    positions to z. Frames are normalized per channel with statistics kept as buffers of the store.
    """

    def __init__(self, profile: ModelProfile, seed: int = 0, dtype: str = "float64", prefix: str = "vae") -> None:
        self.profile: ModelProfile = profile
        self.prefix: str = prefix
        self.store: ParamStore = ParamStore(seed=seed, dtype=dtype)

        d, n = profile.dim, profile.latent_tokens
        store = self.store

        self.input_proj = Linear(store, f"{prefix}.encoder.input", MOTION_DIM, d)
        store.create(f"{prefix}.encoder.position", (profile.max_length, d), scale=POSITION_INIT_SCALE)
        store.create(f"{prefix}.encoder.dist_tokens", (2 * n, d), scale=1.0)
        self.encoder_blocks: List[TransformerBlock] = [
            TransformerBlock(store, f"{prefix}.encoder.block{i}", d, profile.heads, profile.ff_mult)
            for i in range(profile.layers)
        ]
        self.encoder_norm = LayerNorm(store, f"{prefix}.encoder.norm", d)
        self.mean_head = Linear(store, f"{prefix}.encoder.mean", d, d)
        self.log_variance_head = Linear(store, f"{prefix}.encoder.log_variance", d, d)

        store.create(f"{prefix}.decoder.query", (profile.max_length, d), scale=1.0)
        self.decoder_blocks: List[TransformerBlock] = [
            TransformerBlock(store, f"{prefix}.decoder.block{i}", d, profile.heads, profile.ff_mult, cross_attention=True)
            for i in range(profile.layers)
        ]
        self.decoder_norm = LayerNorm(store, f"{prefix}.decoder.norm", d)
        self.output_proj = Linear(store, f"{prefix}.decoder.output", d, MOTION_DIM)

        self.set_normalization(np.zeros(MOTION_DIM), np.ones(MOTION_DIM))
        self.set_latent_scale(1.0)

    @property
    def latent_shape(self) -> Tuple[int, int]:
        return self.profile.latent_tokens, self.profile.dim

    ##### Normalization buffers #####

    def set_normalization(self, mean: np.ndarray, std: np.ndarray) -> None:
        assert np.all(np.asarray(std) > 0), "Channel std must be positive"
        self.store.set_buffer(f"{self.prefix}.channel_mean", mean)
        self.store.set_buffer(f"{self.prefix}.channel_std", std)

    def normalize(self, frames: np.ndarray) -> np.ndarray:
        return (frames - self.store.buffer(f"{self.prefix}.channel_mean")) / self.store.buffer(f"{self.prefix}.channel_std")

    def denormalize(self, frames: np.ndarray) -> np.ndarray:
        return frames * self.store.buffer(f"{self.prefix}.channel_std") + self.store.buffer(f"{self.prefix}.channel_mean")

    def set_latent_scale(self, scale: float) -> None:
        self.store.set_buffer(f"{self.prefix}.latent_scale", np.array([scale]))

    @property
    def latent_scale(self) -> float:
        """Multiplier bringing posterior means to unit scale before diffusion."""
        return float(self.store.buffer(f"{self.prefix}.latent_scale")[0])

    ##### Encoder #####

    def encode_batch(self, frames: np.ndarray, mask: np.ndarray) -> Tuple[GaussianPosterior, Cache]:
        """`frames` are normalized, shape (B, L, d_m); `mask` (B, L) marks valid frames."""
        check_finite(np.where(mask[..., None], frames, 0.0), "encoder frames")
        batch, length, _ = frames.shape
        n2 = 2 * self.profile.latent_tokens

        x_frames, c_in = self.input_proj(np.where(mask[..., None], frames, 0.0).astype(self.store.dtype))
        x_frames = x_frames + self.store[f"{self.prefix}.encoder.position"][:length]
        dist = np.broadcast_to(self.store[f"{self.prefix}.encoder.dist_tokens"], (batch, n2, self.profile.dim))
        x = np.concatenate([dist, x_frames], axis=1)
        key_mask = np.concatenate([np.ones((batch, n2), dtype=bool), mask], axis=1)

        block_caches = []
        for block in self.encoder_blocks:
            x, c_block = block(x, key_mask)
            block_caches.append(c_block)
        h, c_norm = self.encoder_norm(x[:, :n2])

        n = self.profile.latent_tokens
        mean, c_mean = self.mean_head(h[:, :n])
        raw_log_variance, c_lv = self.log_variance_head(h[:, n:])
        log_variance = np.clip(raw_log_variance, LOG_VARIANCE_MIN, LOG_VARIANCE_MAX)

        cache = {
            "length": length, "in": c_in, "blocks": block_caches, "norm": c_norm, "mean": c_mean, "lv": c_lv,
            "clamped": (raw_log_variance < LOG_VARIANCE_MIN) | (raw_log_variance > LOG_VARIANCE_MAX),
            "x_shape": x.shape,
        }
        return GaussianPosterior(mean=mean, log_variance=log_variance), cache

    def backward_encoder(self, grad_mean: np.ndarray, grad_log_variance: np.ndarray, cache: Cache) -> None:
        n, n2 = self.profile.latent_tokens, 2 * self.profile.latent_tokens
        grad_log_variance = np.where(cache["clamped"], 0.0, grad_log_variance)

        g_h = np.concatenate(
            [self.mean_head.backward(grad_mean, cache["mean"]), self.log_variance_head.backward(grad_log_variance, cache["lv"])],
            axis=1,
        )
        g_x = np.zeros(cache["x_shape"], dtype=g_h.dtype)
        g_x[:, :n2] = self.encoder_norm.backward(g_h, cache["norm"])
        for block, c_block in zip(reversed(self.encoder_blocks), reversed(cache["blocks"])):
            g_x, _ = block.backward(g_x, c_block)

        self.store.accumulate(f"{self.prefix}.encoder.dist_tokens", g_x[:, :n2].sum(axis=0))
        g_frames = g_x[:, n2:]
        g_position = np.zeros_like(self.store[f"{self.prefix}.encoder.position"])
        g_position[:cache["length"]] = g_frames.sum(axis=0)
        self.store.accumulate(f"{self.prefix}.encoder.position", g_position)
        self.input_proj.backward(g_frames, cache["in"])
        return

    def encode(self, m: MotionSequence) -> GaussianPosterior:
        check_length(m.length)
        frames, mask = pad_frames([self.normalize(m.frames.astype(np.float64))])
        posterior, _ = self.encode_batch(frames, mask)
        return GaussianPosterior(mean=posterior.mean[0], log_variance=posterior.log_variance[0])

    ##### Decoder #####

    def decode_batch(self, z: np.ndarray, length: int, mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, Cache]:
        """Normalized frames (B, length, d_m) from latents (B, N, d)."""
        if z.shape[-2:] != self.latent_shape:
            raise ShapeError(f"Latent should be {self.latent_shape} but {z.shape[-2:]} was given")
        check_finite(z, "latent code")
        batch = z.shape[0]
        if mask is None:
            mask = np.ones((batch, length), dtype=bool)

        x = np.broadcast_to(self.store[f"{self.prefix}.decoder.query"][:length], (batch, length, self.profile.dim))
        block_caches = []
        for block in self.decoder_blocks:
            x, c_block = block(x, mask, z)
            block_caches.append(c_block)
        h, c_norm = self.decoder_norm(x)
        out, c_out = self.output_proj(h)
        return out, {"length": length, "blocks": block_caches, "norm": c_norm, "out": c_out}

    def backward_decoder(self, grad_frames: np.ndarray, cache: Cache) -> np.ndarray:
        """Accumulates decoder gradients; returns the gradient wrt z."""
        g_x = self.decoder_norm.backward(self.output_proj.backward(grad_frames, cache["out"]), cache["norm"])
        g_z = 0.0
        for block, c_block in zip(reversed(self.decoder_blocks), reversed(cache["blocks"])):
            g_x, g_context = block.backward(g_x, c_block)
            g_z = g_z + g_context

        g_query = np.zeros_like(self.store[f"{self.prefix}.decoder.query"])
        g_query[:cache["length"]] = g_x.sum(axis=0)
        self.store.accumulate(f"{self.prefix}.decoder.query", g_query)
        return g_z

    def decode(self, z: np.ndarray, length: int) -> MotionSequence:
        check_length(length)
        out, _ = self.decode_batch(np.asarray(z)[None], length)
        frames = self.denormalize(out[0])
        frames[:, list(ANGLE_CHANNELS)] = wrap_angle(frames[:, list(ANGLE_CHANNELS)])
        return MotionSequence(frames=frames, metadata={"source": "vae"})

    def reconstruct(self, m: MotionSequence) -> MotionSequence:
        """decode(encode(m).mean) at the length of m."""
        return self.decode(self.encode(m).mean, m.length)
