# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import numpy as np
import pytest

from motioncompose.numerics.functional import (
    attention, gelu, gelu_backward, logsumexp_rows, silu, silu_backward, sinusoidal_embedding, softmax_rows,
    wrap_angle,
)
from motioncompose.numerics.grad_check import grad_check, numeric_gradient, relative_error
from motioncompose.numerics.layers import (
    FeedForward, LayerNorm, Linear, MultiHeadAttention, TimestepMLP, TransformerBlock, merge_heads, split_heads,
)
from motioncompose.numerics.optimizer import AdamW, OptimizerConfig
from motioncompose.numerics.param_store import ParamStore
from motioncompose.numerics.rng import make_rng, restore_rng, rng_state, split_seed
from motioncompose.numerics.tolerances import GRAD_CHECK_RELATIVE, SOFTMAX_ROW_SUM, tolerance
from motioncompose.utils.errors import InvalidInputError, ShapeError


GRAD_TOL = GRAD_CHECK_RELATIVE["float64"]


def test_softmax_rows_sum_to_one_and_shift_invariant(rng):
    m = rng.standard_normal((4, 7)) * 30
    probs = softmax_rows(m, scale=0.5)
    assert np.max(np.abs(probs.sum(axis=-1) - 1.0)) <= tolerance(SOFTMAX_ROW_SUM, np.float64)
    assert np.allclose(probs, softmax_rows(m + 123.0, scale=0.5), atol=1e-12)
    assert np.allclose(np.log(probs), 0.5 * m - logsumexp_rows(m, 0.5)[:, None], atol=1e-10)


def test_softmax_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        softmax_rows(np.array([[0.0, np.nan]]))


def test_attention_ignores_masked_keys(rng):
    q, k, v = rng.standard_normal((3, 4)), rng.standard_normal((5, 4)), rng.standard_normal((5, 2))
    mask = np.array([True, True, False, True, False])
    masked = attention(q, k, v, 0.5, key_mask=mask)
    assert np.allclose(masked, attention(q, k[mask], v[mask], 0.5), atol=1e-12)


def test_attention_shape_errors(rng):
    with pytest.raises(ShapeError):
        attention(rng.standard_normal((2, 3)), rng.standard_normal((4, 5)), rng.standard_normal((4, 2)), 1.0)
    with pytest.raises(ShapeError):
        attention(rng.standard_normal((2, 3)), rng.standard_normal((4, 3)), rng.standard_normal((5, 2)), 1.0)


@pytest.mark.parametrize("fn, fn_backward", [(gelu, gelu_backward), (silu, silu_backward)])
def test_activation_backward_matches_central_differences(rng, fn, fn_backward):
    x = rng.standard_normal(11) * 2
    numeric = numeric_gradient(lambda z: float(np.sum(fn(z))), x)
    assert relative_error(fn_backward(np.ones_like(x), x), numeric) < 1e-7


def test_wrap_angle_range():
    x = np.array([-np.pi, np.pi, 3 * np.pi, -3.5 * np.pi, 0.1, 7.0])
    wrapped = wrap_angle(x)
    assert np.all(wrapped > -np.pi) and np.all(wrapped <= np.pi)
    assert np.allclose(np.cos(wrapped), np.cos(x)) and np.allclose(np.sin(wrapped), np.sin(x))
    assert wrapped[0] == np.pi


def test_sinusoidal_embedding_shape_and_zero_step():
    emb = sinusoidal_embedding(np.array([0, 5, 999]), 8)
    assert emb.shape == (3, 8)
    assert np.allclose(emb[0, :4], 1.0) and np.allclose(emb[0, 4:], 0.0)


def test_split_merge_heads_inverse(rng):
    x = rng.standard_normal((2, 5, 8))
    assert split_heads(x, 4).shape == (2, 4, 5, 2)
    assert np.array_equal(merge_heads(split_heads(x, 4)), x)


@pytest.mark.parametrize("build", [
    lambda store: Linear(store, "lin", 6, 4),
    lambda store: LayerNorm(store, "norm", 6),
    lambda store: FeedForward(store, "ff", 6, 2),
    lambda store: TimestepMLP(store, "temb", 6),
])
def test_simple_layer_gradients(rng, build):
    store = ParamStore(seed=2)
    layer = build(store)
    for name in store.names():
        store.set(name, store[name] + 0.1 * make_rng(5, name).standard_normal(store[name].shape))
    x = rng.standard_normal((2, 3, 6))
    projection = make_rng(1, "projection").standard_normal(layer.forward(x)[0].shape)

    def loss_fn(with_grad: bool) -> float:
        out, cache = layer.forward(x)
        if with_grad:
            layer.backward(projection, cache)
        return float(np.sum(out * projection))

    max_error, per_param = grad_check(loss_fn, store)
    assert max_error <= GRAD_TOL, per_param

    out, cache = layer.forward(x)
    numeric = numeric_gradient(lambda z: float(np.sum(layer.forward(z)[0] * projection)), x)
    assert relative_error(layer.backward(projection, cache), numeric) <= GRAD_TOL


def test_multi_head_attention_gradients_with_key_mask(rng):
    store = ParamStore(seed=4)
    mha = MultiHeadAttention(store, "mha", 8, 2)
    x_q, x_kv = rng.standard_normal((2, 3, 8)), rng.standard_normal((2, 5, 8))
    key_mask = np.array([[True, True, True, False, False], [True, True, True, True, True]])
    projection = make_rng(1, "projection").standard_normal((2, 3, 8))

    def loss_fn(with_grad: bool) -> float:
        out, cache = mha.forward(x_q, x_kv, key_mask)
        if with_grad:
            mha.backward(projection, cache)
        return float(np.sum(out * projection))

    max_error, per_param = grad_check(loss_fn, store)
    assert max_error <= GRAD_TOL, per_param

    out, cache = mha.forward(x_q, x_kv, key_mask)
    g_q, g_kv = mha.backward(projection, cache)
    numeric_kv = numeric_gradient(lambda z: float(np.sum(mha.forward(x_q, z, key_mask)[0] * projection)), x_kv)
    assert relative_error(g_kv, numeric_kv) <= GRAD_TOL
    assert np.allclose(g_kv[0, 3:], 0.0)


@pytest.mark.parametrize("cross_attention", [False, True])
def test_transformer_block_gradients(rng, cross_attention):
    store = ParamStore(seed=6)
    block = TransformerBlock(store, "block", 8, 2, 2, cross_attention=cross_attention)
    x = rng.standard_normal((2, 4, 8))
    mask = np.array([[True, True, True, False], [True] * 4])
    context = rng.standard_normal((2, 3, 8)) if cross_attention else None
    projection = make_rng(1, "projection").standard_normal(x.shape)

    def loss_fn(with_grad: bool) -> float:
        out, cache = block.forward(x, mask, context)
        if with_grad:
            block.backward(projection, cache)
        return float(np.sum(out * projection))

    max_error, per_param = grad_check(loss_fn, store, max_entries=16)
    assert max_error <= GRAD_TOL, per_param

    out, cache = block.forward(x, mask, context)
    g_x, g_context = block.backward(projection, cache)
    numeric = numeric_gradient(lambda z: float(np.sum(block.forward(z, mask, context)[0] * projection)), x)
    assert relative_error(g_x, numeric) <= GRAD_TOL
    if cross_attention:
        numeric_c = numeric_gradient(lambda z: float(np.sum(block.forward(x, mask, z)[0] * projection)), context)
        assert relative_error(g_context, numeric_c) <= GRAD_TOL
    else:
        assert g_context is None


def test_attention_gradients_match_torch(rng):
    torch = pytest.importorskip("torch")
    store = ParamStore(seed=8)
    mha = MultiHeadAttention(store, "mha", 8, 2)
    x = rng.standard_normal((1, 4, 8))
    projection = rng.standard_normal((1, 4, 8))

    out, cache = mha.forward(x, x)
    g_q, g_kv = mha.backward(projection, cache)

    weights = {name: torch.tensor(store[name], requires_grad=True) for name in store.names()}
    xt = torch.tensor(x, requires_grad=True)

    def heads(t):
        return t.reshape(1, 4, 2, 4).transpose(1, 2)

    q, k, v = (heads(xt @ weights[f"mha.to_{n}.weight"]) for n in "qkv")
    probs = torch.softmax(q @ k.transpose(-1, -2) * mha.alpha, dim=-1)
    merged = (probs @ v).transpose(1, 2).reshape(1, 4, 8)
    out_t = merged @ weights["mha.to_out.weight"] + weights["mha.to_out.bias"]
    (out_t * torch.tensor(projection)).sum().backward()

    assert np.allclose(out_t.detach().numpy(), out, atol=1e-12)
    assert np.allclose(xt.grad.numpy(), g_q + g_kv, atol=1e-10)
    for name in store.names():
        assert np.allclose(weights[name].grad.numpy(), store.grad(name), atol=1e-10), name


def test_grad_check_rejects_bad_eps():
    store = ParamStore()
    with pytest.raises(InvalidInputError):
        grad_check(lambda with_grad: 0.0, store, eps=0.1)


def test_named_streams_are_reproducible_and_independent():
    a = make_rng(7, "sampler").standard_normal(5)
    assert np.array_equal(a, make_rng(7, "sampler").standard_normal(5))
    assert not np.allclose(a, make_rng(7, "noise").standard_normal(5))
    assert not np.allclose(a, make_rng(8, "sampler").standard_normal(5))
    assert split_seed(7, "record", 1) == split_seed(7, "record", 1) != split_seed(7, "record", 2)


def test_rng_state_restores_the_stream():
    rng = make_rng(3, "train")
    rng.standard_normal(17)
    state = rng_state(rng)
    expected = rng.standard_normal(9)
    assert np.array_equal(restore_rng(state).standard_normal(9), expected)


def test_param_store_state_dict_and_strict_loading():
    store = ParamStore(seed=1)
    store.create("a.weight", (2, 3))
    store.create("a.bias", (3,), init="zeros")
    store.set_buffer("mean", np.arange(3.0))

    other = ParamStore(seed=99)
    other.create("a.weight", (2, 3))
    other.create("a.bias", (3,), init="zeros")
    other.load_state_dict(store.state_dict())
    assert np.array_equal(other["a.weight"], store["a.weight"])
    assert np.array_equal(other.buffer("mean"), np.arange(3.0))

    partial = ParamStore()
    partial.create("a.weight", (2, 3))
    with pytest.raises(ShapeError):
        partial.load_state_dict(store.state_dict())
    with pytest.raises(ShapeError):
        store.set("a.bias", np.zeros(4))


def test_initialization_does_not_depend_on_creation_order():
    first, second = ParamStore(seed=5), ParamStore(seed=5)
    first.create("x", (3,))
    first.create("y", (4,))
    second.create("y", (4,))
    second.create("x", (3,))
    assert np.array_equal(first["x"], second["x"]) and np.array_equal(first["y"], second["y"])


def test_adamw_two_stage_rate_and_clipping():
    store = ParamStore(seed=0)
    store.create("w", (4,))
    optimizer = AdamW(store, OptimizerConfig(lr=0.1, final_lr=0.01, stage_steps=3, max_grad_norm=1.0))
    assert optimizer.learning_rate(2) == 0.1 and optimizer.learning_rate(3) == 0.01

    start = float(np.sum(store["w"] ** 2))
    for _ in range(20):
        store.zero_grad()
        store.accumulate("w", 200.0 * store["w"])
        norm = optimizer.step()
        assert norm >= 0
    assert float(np.sum(store["w"] ** 2)) < start

    store.zero_grad()
    store.accumulate("w", np.full(4, 10.0))
    optimizer.clip_gradients()
    assert np.isclose(store.grad_norm(), 1.0)
