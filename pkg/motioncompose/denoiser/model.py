# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from motioncompose.common import ModelProfile
from motioncompose.denoiser.concept_embedding import ConceptEmbedder
from motioncompose.denoiser.energy_attention import AgdConfig, EnergyCrossAttention
from motioncompose.numerics.functional import check_finite, sinusoidal_embedding
from motioncompose.numerics.layers import Cache, LayerNorm, Linear, TimestepMLP, TransformerBlock
from motioncompose.numerics.param_store import ParamStore
from motioncompose.toymotion.common import MOTION_DIM
from motioncompose.utils.errors import InvalidInputError, ShapeError, StateError


SUBSTRATES = ("latent", "sequence")
POSITION_INIT_SCALE: float = 0.02

# mix(layer_idx, branch_outputs) -> merged cross-attention output fed to every branch.
MixHook = Callable[[int, List[np.ndarray]], np.ndarray]
# tap(layer_idx, branch_outputs, merged) is called after every cross-attention layer.
TapHook = Callable[[int, List[np.ndarray], np.ndarray], None]


class Denoiser:
    """ε_θ(x_t, i, c): self-attention over tokens, energy cross-attention to the concept embedding, feed-forward.

    The latent substrate works on N × d latent codes; the sequence substrate on L × d_m frames with a validity mask.
    Time conditioning is a sinusoidal embedding of the step index i ∈ [0, T) passed through an MLP and added to all
    tokens.
    """

    def __init__(
        self, profile: ModelProfile, substrate: str = "latent", num_steps: int = 1000, seed: int = 0,
        dtype: str = "float64", prefix: str = "denoiser", initialize: bool = True,
    ) -> None:
        if substrate not in SUBSTRATES:
            raise InvalidInputError(f"Unknown substrate {substrate}, choose from {SUBSTRATES}")
        self.profile: ModelProfile = profile
        self.substrate: str = substrate
        self.num_steps: int = num_steps
        self.prefix: str = prefix
        self.store: ParamStore = ParamStore(seed=seed, dtype=dtype)
        # False until parameters are trained or loaded.
        self.installed: bool = initialize

        d = profile.dim
        self.token_dim: int = d if substrate == "latent" else MOTION_DIM
        self.max_tokens: int = profile.latent_tokens if substrate == "latent" else profile.max_length

        store = self.store
        self.input_proj = Linear(store, f"{prefix}.input", self.token_dim, d)
        store.create(f"{prefix}.position", (self.max_tokens, d), scale=POSITION_INIT_SCALE)
        self.time_mlp = TimestepMLP(store, f"{prefix}.time", d)
        self.blocks: List[TransformerBlock] = [
            TransformerBlock(
                store, f"{prefix}.block{i}", d, profile.heads, profile.ff_mult, cross_attention=True,
                cross_attention_class=EnergyCrossAttention,
            )
            for i in range(profile.layers)
        ]
        self.norm = LayerNorm(store, f"{prefix}.norm", d)
        self.output_proj = Linear(store, f"{prefix}.output", d, self.token_dim)
        self.embedder = ConceptEmbedder(store, f"{prefix}.concept", d)

    ##### Frame normalization (sequence substrate) #####

    def set_normalization(self, mean: np.ndarray, std: np.ndarray) -> None:
        self.store.set_buffer(f"{self.prefix}.channel_mean", mean)
        self.store.set_buffer(f"{self.prefix}.channel_std", std)

    def normalize(self, frames: np.ndarray) -> np.ndarray:
        mean = self.store.buffer(f"{self.prefix}.channel_mean", np.zeros(self.token_dim))
        return (frames - mean) / self.store.buffer(f"{self.prefix}.channel_std", np.ones(self.token_dim))

    def denormalize(self, frames: np.ndarray) -> np.ndarray:
        mean = self.store.buffer(f"{self.prefix}.channel_mean", np.zeros(self.token_dim))
        return frames * self.store.buffer(f"{self.prefix}.channel_std", np.ones(self.token_dim)) + mean

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self.store.load_state_dict(state)
        self.installed = True

    def _check_tokens(self, x_t: np.ndarray) -> None:
        if x_t.shape[-1] != self.token_dim or x_t.shape[-2] > self.max_tokens:
            raise ShapeError(
                f"{self.substrate} denoiser expects (..., ≤{self.max_tokens}, {self.token_dim}) but got {x_t.shape}"
            )

    def _embed_tokens(self, x_t: np.ndarray, steps: np.ndarray) -> Tuple[np.ndarray, Cache]:
        x, c_in = self.input_proj(x_t)
        temb, c_time = self.time_mlp(sinusoidal_embedding(steps, self.profile.dim).astype(self.store.dtype))
        x = x + self.store[f"{self.prefix}.position"][:x_t.shape[-2]] + temb[..., None, :]
        return x, {"in": c_in, "time": c_time, "length": x_t.shape[-2]}

    def _backward_tokens(self, g_x: np.ndarray, cache: Cache) -> None:
        g_position = np.zeros_like(self.store[f"{self.prefix}.position"])
        g_position[:cache["length"]] = g_x.reshape(-1, cache["length"], g_x.shape[-1]).sum(axis=0)
        self.store.accumulate(f"{self.prefix}.position", g_position)
        self.time_mlp.backward(g_x.sum(axis=-2), cache["time"])
        self.input_proj.backward(g_x, cache["in"])
        return

    ##### Training path #####

    def forward(
        self, x_t: np.ndarray, steps: np.ndarray, c: np.ndarray, c_mask: np.ndarray, mask: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, Cache]:
        """Batched prediction: x_t (B, n, token_dim), steps (B,), padded c (B, T, d) with key mask (B, T)."""
        self._check_tokens(x_t)
        x, c_tokens = self._embed_tokens(x_t, steps)
        block_caches = []
        for block in self.blocks:
            x, c_block = block(x, mask, c, c_mask)
            block_caches.append(c_block)
        h, c_norm = self.norm(x)
        eps, c_out = self.output_proj(h)
        return eps, {"tokens": c_tokens, "blocks": block_caches, "norm": c_norm, "out": c_out}

    def backward(self, grad_eps: np.ndarray, cache: Cache) -> np.ndarray:
        """Accumulates parameter gradients; returns the gradient wrt the padded concept embedding."""
        g_x = self.norm.backward(self.output_proj.backward(grad_eps, cache["out"]), cache["norm"])
        g_c = 0.0
        for block, c_block in zip(reversed(self.blocks), reversed(cache["blocks"])):
            g_x, g_context = block.backward(g_x, c_block)
            g_c = g_c + g_context
        self._backward_tokens(g_x, cache["tokens"])
        return g_c

    ##### Sampling path #####

    def predict_eps(
        self, x_t: np.ndarray, t: int, c: Union[np.ndarray, Sequence[np.ndarray]], agd: Optional[AgdConfig] = None,
        mix: Optional[MixHook] = None, tap: Optional[TapHook] = None, mask: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Predicted noise with the shape of `x_t` ((n, token_dim) or (B, n, token_dim)) at step index t.

        `c` is one concept embedding (T × d, or B × T × d), or a list of them when `mix` is given: every branch then
        runs its own (AGD-refined) cross-attention and `mix` merges the branch outputs after each layer. Refined
        embeddings carry over from layer to layer and are dropped at the end of the call.
        """
        if not self.installed:
            raise StateError("Denoiser parameters are not installed, train or load a checkpoint first")
        if not 0 <= int(t) < self.num_steps:
            raise InvalidInputError(f"Step index should be in [0, {self.num_steps}) but {t} was given")
        x_t = np.asarray(x_t)
        self._check_tokens(x_t)
        check_finite(x_t, "denoiser input")

        branches = list(c) if isinstance(c, (list, tuple)) else [c]
        if len(branches) > 1 and mix is None:
            raise InvalidInputError("Several concept branches need a mix hook")
        agd = AgdConfig() if agd is None else agd

        steps = np.full(x_t.shape[:-2], int(t))
        x, _ = self._embed_tokens(x_t, steps)
        for layer_idx, block in enumerate(self.blocks):
            x, _ = block.forward_self(x, mask)
            h, _ = block.norm_cross(x)

            outputs = []
            for branch_idx, c_branch in enumerate(branches):
                out, branches[branch_idx], _ = block.cross_attn.forward_energy(h, c_branch, agd, mask)
                outputs.append(out)
            merged = outputs[0] if mix is None else mix(layer_idx, outputs)
            if tap is not None:
                tap(layer_idx, outputs, merged)

            x = x + merged
            x, _ = block.forward_ff(x)

        h, _ = self.norm(x)
        eps, _ = self.output_proj(h)
        return eps
