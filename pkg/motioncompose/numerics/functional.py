# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import math
from typing import Optional

import numpy as np

from motioncompose.numerics.tolerances import MASK_LOGIT
from motioncompose.utils.errors import InvalidInputError, ShapeError


# A Tensor2 is a 2-D numpy array; every op below also accepts leading batch dimensions.
Tensor2 = np.ndarray


def check_finite(x: np.ndarray, what: str = "input") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"Non-finite values found in {what}")
    return x


def softmax_rows(m: Tensor2, scale: float = 1.0) -> Tensor2:
    """Row-wise softmax of `scale * m`, stabilized by subtracting the row max."""
    m = np.asarray(m)
    check_finite(m, "softmax input")
    logits = m * scale
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def softmax_rows_backward(grad_out: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Gradient wrt the (unscaled) logits given the softmax output."""
    return probs * (grad_out - np.sum(grad_out * probs, axis=-1, keepdims=True))


def logsumexp_rows(m: np.ndarray, scale: float = 1.0) -> np.ndarray:
    logits = np.asarray(m) * scale
    row_max = np.max(logits, axis=-1, keepdims=True)
    return (row_max + np.log(np.sum(np.exp(logits - row_max), axis=-1, keepdims=True)))[..., 0]


def apply_key_mask(scores: np.ndarray, key_mask: Optional[np.ndarray]) -> np.ndarray:
    """Replace logits of invalid keys (mask False) by MASK_LOGIT. `key_mask` has shape (..., n_keys)."""
    if key_mask is None:
        return scores
    mask = np.asarray(key_mask, dtype=bool)
    while mask.ndim < scores.ndim:
        mask = np.expand_dims(mask, axis=-2)
    return np.where(mask, scores, MASK_LOGIT)


def attention(
    q: Tensor2, k: Tensor2, v: Tensor2, scale: float, key_mask: Optional[np.ndarray] = None,
) -> Tensor2:
    """softmax_rows(q kᵀ · scale) v."""
    q, k, v = np.asarray(q), np.asarray(k), np.asarray(v)
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"Query dim {q.shape[-1]} does not match key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"{k.shape[-2]} keys but {v.shape[-2]} values")
    scores = apply_key_mask(q @ np.swapaxes(k, -1, -2) * scale, key_mask)
    return softmax_rows(scores) @ v


def gelu(x: np.ndarray) -> np.ndarray:
    inner = math.sqrt(2.0 / math.pi) * (x + 0.044715 * x ** 3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def gelu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    c = math.sqrt(2.0 / math.pi)
    th = np.tanh(c * (x + 0.044715 * x ** 3))
    d_inner = c * (1.0 + 3 * 0.044715 * x ** 2)
    return grad_out * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th ** 2) * d_inner)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def silu(x: np.ndarray) -> np.ndarray:
    return x * sigmoid(x)


def silu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    s = sigmoid(x)
    return grad_out * (s + x * s * (1.0 - s))


def sinusoidal_embedding(steps: np.ndarray, dim: int, max_period: float = 10000.0) -> np.ndarray:
    """Standard transformer timestep embedding, shape (*steps.shape, dim)."""
    assert dim % 2 == 0, f"Embedding dim must be even but {dim} was given"
    steps = np.asarray(steps, dtype=np.float64)
    half = dim // 2
    freqs = np.exp(-math.log(max_period) * np.arange(half, dtype=np.float64) / half)
    args = steps[..., None] * freqs
    return np.concatenate([np.cos(args), np.sin(args)], axis=-1)


def wrap_angle(x: np.ndarray) -> np.ndarray:
    """Wrap angles into (-π, π]."""
    wrapped = np.mod(x + np.pi, 2 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)
