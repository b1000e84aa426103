# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

"""Cross-attention read as energy descent on the concept embedding.

With Q the projected latent queries and K = c W_K the projected concept keys (per head, α = 1/√d_head), two energies
of K are used:

  E(Q|K) = −α⁻¹ Σ_i log Σ_j exp(α k_i·q_j)          −∇_K E(Q|K) = SFM(α K Qᵀ) Q
  E(K)   = α⁻¹ log Σ_i exp(½ α ‖k_i‖²)   ("token")    ∇_K E(K)    = M(SFM(K′)) K,  K′_i = ½ α ‖k_i‖²
  E(K)   = ½ tr(K D Kᵀ), D = M(SFM(½ KᵀK)) frozen ("feature")     ∇_K E(K) = K D

The refined embedding is ĉ = c + γ_attn · SFM(α K Qᵀ) Q W_Kᵀ − γ_reg · ∇_K E(K) W_Kᵀ, summed over heads: a descent
step on γ_attn · E(Q|K) + γ_reg · E(K) wrt c.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from motioncompose.numerics.functional import apply_key_mask, logsumexp_rows, softmax_rows
from motioncompose.numerics.layers import Cache, MultiHeadAttention, merge_heads, split_heads
from motioncompose.utils.errors import InvalidInputError, ShapeError


REGULARIZERS = ("token", "feature")


@dataclass
class AgdConfig:
    gamma_attn: float = 0.0
    gamma_reg: float = 0.0
    regularizer: str = "token"

    def __post_init__(self) -> None:
        for name in ("gamma_attn", "gamma_reg"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidInputError(f"{name} should be finite and non-negative but {value} was given")
        if self.regularizer not in REGULARIZERS:
            raise InvalidInputError(f"Unknown regularizer {self.regularizer}, choose from {REGULARIZERS}")

    @property
    def enabled(self) -> bool:
        return self.gamma_attn > 0 or self.gamma_reg > 0


# Step sizes used for multi-concept generation.
MULTI_CONCEPT_AGD = AgdConfig(gamma_attn=0.001, gamma_reg=0.002)


##### Per-head energies over projected matrices #####

def query_key_energy(q: np.ndarray, k: np.ndarray, alpha: float, query_mask: Optional[np.ndarray] = None) -> float:
    scores = apply_key_mask(k @ np.swapaxes(q, -1, -2), query_mask)
    return float(-np.sum(logsumexp_rows(scores, scale=alpha)) / alpha)


def attention_term(q: np.ndarray, k: np.ndarray, alpha: float, query_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """SFM(α K Qᵀ) Q, i.e. −∇_K E(Q|K)."""
    scores = apply_key_mask(alpha * (k @ np.swapaxes(q, -1, -2)), query_mask)
    return softmax_rows(scores) @ q


def feature_weights(k: np.ndarray) -> np.ndarray:
    """Diagonal of SFM(½ KᵀK), shape (..., d_head)."""
    gram = 0.5 * np.swapaxes(k, -1, -2) @ k
    return np.diagonal(softmax_rows(gram), axis1=-2, axis2=-1)


def key_energy(k: np.ndarray, alpha: float, kind: str = "token", weights: Optional[np.ndarray] = None) -> float:
    """Regularizer energy E(K). For "feature", `weights` (the frozen diagonal D) default to feature_weights(k)."""
    if kind == "token":
        half_norms = 0.5 * alpha * np.sum(k * k, axis=-1)
        return float(np.sum(logsumexp_rows(half_norms)) / alpha)
    if kind == "feature":
        weights = feature_weights(k) if weights is None else weights
        return float(0.5 * np.sum(k * k * weights[..., None, :]))
    raise ValueError(f"Unrecognized regularizer: {kind}")


def regularizer_term(k: np.ndarray, alpha: float, kind: str = "token") -> np.ndarray:
    """∇_K E(K) with the feature weights frozen at `k`."""
    if kind == "token":
        probs = softmax_rows(0.5 * alpha * np.sum(k * k, axis=-1))
        return probs[..., None] * k
    if kind == "feature":
        return k * feature_weights(k)[..., None, :]
    raise ValueError(f"Unrecognized regularizer: {kind}")


class EnergyCrossAttention(MultiHeadAttention):
    """Multi-head cross-attention from latent tokens to concept embeddings, with an optional embedding refinement."""

    def _heads(self, x: np.ndarray) -> np.ndarray:
        return split_heads(x, self.heads)

    def refine(
        self, q: np.ndarray, c: np.ndarray, agd: AgdConfig, query_mask: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """One step on c from projected queries `q` (..., n, d); returns c unchanged when AGD is off."""
        if not agd.enabled:
            return c
        if c.shape[-1] != self.dim:
            raise ShapeError(f"Concept embedding dim {c.shape[-1]} does not match attention dim {self.dim}")

        w_k = self._param("to_k.weight")
        k_h, q_h = self._heads(c @ w_k), self._heads(q)

        step = 0.0
        if agd.gamma_attn > 0:
            step = step + agd.gamma_attn * merge_heads(attention_term(q_h, k_h, self.alpha, query_mask))
        if agd.gamma_reg > 0:
            step = step - agd.gamma_reg * merge_heads(regularizer_term(k_h, self.alpha, agd.regularizer))
        return c + step @ w_k.T

    def energy(
        self, q: np.ndarray, c: np.ndarray, agd: AgdConfig, query_mask: Optional[np.ndarray] = None,
        frozen_weights: Optional[np.ndarray] = None,
    ) -> float:
        """γ_attn · Σ_h E(Q_h|K_h) + γ_reg · Σ_h E(K_h); `refine` is one unit gradient step on it wrt c."""
        k_h, q_h = self._heads(c @ self._param("to_k.weight")), self._heads(q)
        return (
            agd.gamma_attn * query_key_energy(q_h, k_h, self.alpha, query_mask)
            + agd.gamma_reg * key_energy(k_h, self.alpha, agd.regularizer, frozen_weights)
        )

    def forward_energy(
        self, x_q: np.ndarray, c: np.ndarray, agd: AgdConfig, query_mask: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, np.ndarray, Cache]:
        """Refine c from the queries of `x_q`, then attend to the refined embedding. Returns (out, c_refined, cache)."""
        q, c_q = self.to_q(x_q)
        c_refined = self.refine(q, c, agd, query_mask)
        k, v, c_kv = self.project_kv(c_refined)
        merged, c_att = self.attend(q, k, v)
        out, c_out = self.to_out(merged)
        return out, c_refined, {"q": c_q, "kv": c_kv, "att": c_att, "out": c_out}


def energy_cross_attention(
    layer: EnergyCrossAttention, x_q: np.ndarray, c: np.ndarray, agd: AgdConfig,
    query_mask: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """(attention output, refined embedding) of one energy cross-attention layer."""
    out, c_refined, _ = layer.forward_energy(x_q, c, agd, query_mask)
    return out, c_refined
