# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from motioncompose.numerics.functional import Tensor2, attention, check_finite, softmax_rows
from motioncompose.numerics.grad_check import grad_check
from motioncompose.numerics.layers import (
    FeedForward, LayerNorm, Linear, MultiHeadAttention, TimestepMLP, TransformerBlock,
)
from motioncompose.numerics.optimizer import AdamW, OptimizerConfig
from motioncompose.numerics.param_store import ParamStore
from motioncompose.numerics.rng import make_rng, split_seed


__all__ = [
    "AdamW", "FeedForward", "LayerNorm", "Linear", "MultiHeadAttention", "OptimizerConfig", "ParamStore",
    "Tensor2", "TimestepMLP", "TransformerBlock", "attention", "check_finite", "grad_check", "make_rng",
    "softmax_rows", "split_seed",
]
