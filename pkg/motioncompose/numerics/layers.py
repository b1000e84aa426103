# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

"""Layers with hand-derived reverse-mode gradients.

Every layer is a thin view over named entries of a ParamStore. `forward` is pure and returns `(output, cache)`;
`backward(grad_output, cache)` accumulates parameter gradients into the store and returns the input gradient(s).
All layers accept arbitrary leading batch dimensions.
"""

import math
from typing import Any, Dict, Optional, Tuple

import numpy as np

from motioncompose.numerics.functional import (
    apply_key_mask, gelu, gelu_backward, silu, silu_backward, softmax_rows, softmax_rows_backward,
)
from motioncompose.numerics.param_store import ParamStore


Cache = Dict[str, Any]


class Module:
    def __init__(self, store: ParamStore, name: str) -> None:
        self._store: ParamStore = store
        self.name: str = name

    def _param(self, key: str) -> np.ndarray:
        return self._store[f"{self.name}.{key}"]

    def _accumulate(self, key: str, grad: np.ndarray) -> None:
        self._store.accumulate(f"{self.name}.{key}", grad)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int, bias: bool = True) -> None:
        super().__init__(store, name)
        self.d_in: int = d_in
        self.d_out: int = d_out
        self.bias: bool = bias

        store.create(f"{name}.weight", (d_in, d_out), init="normal", scale=1.0 / math.sqrt(d_in))
        if bias:
            store.create(f"{name}.bias", (d_out,), init="zeros")

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Cache]:
        out = x @ self._param("weight")
        if self.bias:
            out = out + self._param("bias")
        return out, {"x": x}

    def backward(self, grad_out: np.ndarray, cache: Cache) -> np.ndarray:
        x = cache["x"]
        self._accumulate("weight", x.reshape(-1, self.d_in).T @ grad_out.reshape(-1, self.d_out))
        if self.bias:
            self._accumulate("bias", grad_out.reshape(-1, self.d_out).sum(axis=0))
        return grad_out @ self._param("weight").T


class LayerNorm(Module):
    def __init__(self, store: ParamStore, name: str, dim: int, eps: float = 1e-5) -> None:
        super().__init__(store, name)
        self.dim: int = dim
        self.eps: float = eps

        store.create(f"{name}.gain", (dim,), init="ones")
        store.create(f"{name}.shift", (dim,), init="zeros")

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Cache]:
        mean = x.mean(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + self.eps)
        x_hat = (x - mean) * inv_std
        return x_hat * self._param("gain") + self._param("shift"), {"x_hat": x_hat, "inv_std": inv_std}

    def backward(self, grad_out: np.ndarray, cache: Cache) -> np.ndarray:
        x_hat, inv_std = cache["x_hat"], cache["inv_std"]
        self._accumulate("gain", (grad_out * x_hat).reshape(-1, self.dim).sum(axis=0))
        self._accumulate("shift", grad_out.reshape(-1, self.dim).sum(axis=0))

        g_hat = grad_out * self._param("gain")
        return inv_std * (
            g_hat
            - g_hat.mean(axis=-1, keepdims=True)
            - x_hat * (g_hat * x_hat).mean(axis=-1, keepdims=True)
        )


class FeedForward(Module):
    def __init__(self, store: ParamStore, name: str, dim: int, mult: int = 2) -> None:
        super().__init__(store, name)
        self.fc_in = Linear(store, f"{name}.fc_in", dim, dim * mult)
        self.fc_out = Linear(store, f"{name}.fc_out", dim * mult, dim)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Cache]:
        h, c_in = self.fc_in(x)
        a = gelu(h)
        out, c_out = self.fc_out(a)
        return out, {"h": h, "fc_in": c_in, "fc_out": c_out}

    def backward(self, grad_out: np.ndarray, cache: Cache) -> np.ndarray:
        g_a = self.fc_out.backward(grad_out, cache["fc_out"])
        g_h = gelu_backward(g_a, cache["h"])
        return self.fc_in.backward(g_h, cache["fc_in"])


class TimestepMLP(Module):
    """Linear -> SiLU -> Linear applied to a sinusoidal timestep embedding."""

    def __init__(self, store: ParamStore, name: str, dim: int) -> None:
        super().__init__(store, name)
        self.fc_in = Linear(store, f"{name}.fc_in", dim, dim)
        self.fc_out = Linear(store, f"{name}.fc_out", dim, dim)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Cache]:
        h, c_in = self.fc_in(x)
        out, c_out = self.fc_out(silu(h))
        return out, {"h": h, "fc_in": c_in, "fc_out": c_out}

    def backward(self, grad_out: np.ndarray, cache: Cache) -> np.ndarray:
        g_a = self.fc_out.backward(grad_out, cache["fc_out"])
        return self.fc_in.backward(silu_backward(g_a, cache["h"]), cache["fc_in"])


def split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    """(..., n, d) -> (..., heads, n, d // heads)"""
    *lead, n, d = x.shape
    return np.swapaxes(x.reshape(*lead, n, heads, d // heads), -2, -3)


def merge_heads(x: np.ndarray) -> np.ndarray:
    """(..., heads, n, dh) -> (..., n, heads * dh)"""
    x = np.swapaxes(x, -2, -3)
    *lead, n, heads, dh = x.shape
    return x.reshape(*lead, n, heads * dh)


class MultiHeadAttention(Module):
    """softmax(Q Kᵀ / √d_head) V with Q = x_q W_Q, K = x_kv W_K, V = x_kv W_V, followed by an output projection."""

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int) -> None:
        super().__init__(store, name)
        assert dim % heads == 0, f"dim {dim} is not divisible by heads {heads}"
        self.dim: int = dim
        self.heads: int = heads
        self.head_dim: int = dim // heads
        self.alpha: float = 1.0 / math.sqrt(self.head_dim)

        self.to_q = Linear(store, f"{name}.to_q", dim, dim, bias=False)
        self.to_k = Linear(store, f"{name}.to_k", dim, dim, bias=False)
        self.to_v = Linear(store, f"{name}.to_v", dim, dim, bias=False)
        self.to_out = Linear(store, f"{name}.to_out", dim, dim)

    def project_kv(self, x_kv: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Cache]:
        k, c_k = self.to_k(x_kv)
        v, c_v = self.to_v(x_kv)
        return k, v, {"k": c_k, "v": c_v}

    def attend(
        self, q: np.ndarray, k: np.ndarray, v: np.ndarray, key_mask: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, Cache]:
        """Multi-head attention over already projected q, k, v; returns the merged (pre-output-projection) result."""
        q_h, k_h, v_h = split_heads(q, self.heads), split_heads(k, self.heads), split_heads(v, self.heads)
        scores = apply_key_mask(q_h @ np.swapaxes(k_h, -1, -2) * self.alpha, key_mask)
        probs = softmax_rows(scores)
        return merge_heads(probs @ v_h), {"q_h": q_h, "k_h": k_h, "v_h": v_h, "probs": probs}

    def forward(
        self, x_q: np.ndarray, x_kv: np.ndarray, key_mask: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, Cache]:
        q, c_q = self.to_q(x_q)
        k, v, c_kv = self.project_kv(x_kv)
        merged, c_att = self.attend(q, k, v, key_mask)
        out, c_out = self.to_out(merged)
        return out, {"q": c_q, "kv": c_kv, "att": c_att, "out": c_out}

    def backward(self, grad_out: np.ndarray, cache: Cache) -> Tuple[np.ndarray, np.ndarray]:
        """Returns (grad wrt x_q, grad wrt x_kv). For self-attention the caller sums both."""
        c_att = cache["att"]
        g_merged = self.to_out.backward(grad_out, cache["out"])
        g_o = split_heads(g_merged, self.heads)

        probs = c_att["probs"]
        g_probs = g_o @ np.swapaxes(c_att["v_h"], -1, -2)
        g_v = np.swapaxes(probs, -1, -2) @ g_o
        g_scores = softmax_rows_backward(g_probs, probs) * self.alpha
        g_q = g_scores @ c_att["k_h"]
        g_k = np.swapaxes(g_scores, -1, -2) @ c_att["q_h"]

        g_x_q = self.to_q.backward(merge_heads(g_q), cache["q"])
        g_x_kv = (
            self.to_k.backward(merge_heads(g_k), cache["kv"]["k"])
            + self.to_v.backward(merge_heads(g_v), cache["kv"]["v"])
        )
        return g_x_q, g_x_kv


class TransformerBlock(Module):
    """Pre-LN block: x + SelfAttn(LN x) [+ CrossAttn(LN x, ctx)] + FF(LN x)."""

    def __init__(
        self, store: ParamStore, name: str, dim: int, heads: int, ff_mult: int = 2, cross_attention: bool = False,
        cross_attention_class: type = MultiHeadAttention,
    ) -> None:
        super().__init__(store, name)
        self.cross_attention: bool = cross_attention

        self.norm_self = LayerNorm(store, f"{name}.norm_self", dim)
        self.self_attn = MultiHeadAttention(store, f"{name}.self_attn", dim, heads)
        if cross_attention:
            self.norm_cross = LayerNorm(store, f"{name}.norm_cross", dim)
            self.cross_attn = cross_attention_class(store, f"{name}.cross_attn", dim, heads)
        self.norm_ff = LayerNorm(store, f"{name}.norm_ff", dim)
        self.ff = FeedForward(store, f"{name}.ff", dim, ff_mult)

    def forward_self(self, x: np.ndarray, mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, Cache]:
        h, c_norm = self.norm_self(x)
        a, c_attn = self.self_attn(h, h, mask)
        return x + a, {"norm": c_norm, "attn": c_attn}

    def forward_ff(self, x: np.ndarray) -> Tuple[np.ndarray, Cache]:
        h, c_norm = self.norm_ff(x)
        f, c_ff = self.ff(h)
        return x + f, {"norm": c_norm, "ff": c_ff}

    def forward(
        self, x: np.ndarray, mask: Optional[np.ndarray] = None,
        context: Optional[np.ndarray] = None, context_mask: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, Cache]:
        cache: Cache = {}
        x, cache["self"] = self.forward_self(x, mask)
        if self.cross_attention:
            assert context is not None, f"Block {self.name} needs a context for cross-attention"
            h, c_norm = self.norm_cross(x)
            b, c_attn = self.cross_attn(h, context, context_mask)
            x = x + b
            cache["cross"] = {"norm": c_norm, "attn": c_attn}
        x, cache["ff"] = self.forward_ff(x)
        return x, cache

    def backward(self, grad_out: np.ndarray, cache: Cache) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Returns (grad wrt x, grad wrt context or None)."""
        g = grad_out + self.norm_ff.backward(self.ff.backward(grad_out, cache["ff"]["ff"]), cache["ff"]["norm"])

        g_context = None
        if self.cross_attention:
            g_h, g_context = self.cross_attn.backward(g, cache["cross"]["attn"])
            g = g + self.norm_cross.backward(g_h, cache["cross"]["norm"])

        g_q, g_kv = self.self_attn.backward(g, cache["self"]["attn"])
        g = g + self.norm_self.backward(g_q + g_kv, cache["self"]["norm"])
        return g, g_context
