# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from dataclasses import dataclass
from typing import Dict

import numpy as np

from motioncompose.numerics.param_store import ParamStore


@dataclass
class OptimizerConfig:
    lr: float = 1e-4
    final_lr: float = 1e-5
    # Steps trained at `lr` before switching to `final_lr`.
    stage_steps: int = 2000
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    max_grad_norm: float = 1.0


class AdamW:
    """Decoupled weight decay Adam with a two-stage (no warmup) learning rate."""

    def __init__(self, store: ParamStore, config: OptimizerConfig, prefix: str = "") -> None:
        self._store: ParamStore = store
        self._config: OptimizerConfig = config
        self._prefix: str = prefix

        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}
        self.step_count: int = 0

    def learning_rate(self, step: int) -> float:
        return self._config.lr if step < self._config.stage_steps else self._config.final_lr

    def clip_gradients(self) -> float:
        norm = self._store.grad_norm(self._prefix)
        max_norm = self._config.max_grad_norm
        if max_norm is not None and max_norm > 0 and norm > max_norm:
            scale = max_norm / (norm + 1e-12)
            for _, _, grad in self._store.parameters(self._prefix):
                grad *= scale
        return norm

    def step(self) -> float:
        """Apply one update from the accumulated gradients; returns the pre-clip gradient norm."""
        grad_norm = self.clip_gradients()

        lr = self.learning_rate(self.step_count)
        self.step_count += 1
        beta1, beta2 = self._config.betas
        correction1 = 1.0 - beta1 ** self.step_count
        correction2 = 1.0 - beta2 ** self.step_count

        for name, value, grad in self._store.parameters(self._prefix):
            if name not in self._m:
                self._m[name] = np.zeros_like(value)
                self._v[name] = np.zeros_like(value)
            m, v = self._m[name], self._v[name]
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad

            if self._config.weight_decay > 0:
                value -= lr * self._config.weight_decay * value
            value -= lr * (m / correction1) / (np.sqrt(v / correction2) + self._config.eps)

        return grad_norm
