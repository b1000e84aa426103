# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from motioncompose.numerics.rng import make_rng
from motioncompose.utils.errors import InvalidInputError, ShapeError


class ParamStore:
    """Named parameters with same-shape gradient buffers, plus non-trainable buffers (normalization stats...).

    Parameter initialization draws from the stream `make_rng(seed, "init", name)`, so creation order never changes
    the initial values.
    """

    def __init__(self, seed: int = 0, dtype: str = "float64") -> None:
        self.seed: int = seed
        self.dtype: np.dtype = np.dtype(dtype)

        self._params: Dict[str, np.ndarray] = {}
        self._grads: Dict[str, np.ndarray] = {}
        self._buffers: Dict[str, np.ndarray] = {}

    def create(self, name: str, shape: Tuple[int, ...], init: str = "normal", scale: float = 1.0) -> str:
        assert name not in self._params, f"Parameter {name} already exists"
        if init == "normal":
            value = make_rng(self.seed, "init", name).standard_normal(shape) * scale
        elif init == "zeros":
            value = np.zeros(shape)
        elif init == "ones":
            value = np.ones(shape)
        else:
            raise ValueError(f"Unrecognized init: {init}")

        self._params[name] = value.astype(self.dtype)
        self._grads[name] = np.zeros(shape, dtype=self.dtype)
        return name

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self, prefix: str = "") -> List[str]:
        return sorted(name for name in self._params if name.startswith(prefix))

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        if grad.shape != self._grads[name].shape:
            raise ShapeError(f"Gradient of shape {grad.shape} given for {name} of shape {self._grads[name].shape}")
        self._grads[name] += grad

    def zero_grad(self) -> None:
        for grad in self._grads.values():
            grad.fill(0.0)

    def set(self, name: str, value: np.ndarray) -> None:
        value = np.asarray(value)
        if value.shape != self._params[name].shape:
            raise ShapeError(f"Value of shape {value.shape} given for {name} of shape {self._params[name].shape}")
        if not np.all(np.isfinite(value)):
            raise InvalidInputError(f"Non-finite value given for parameter {name}")
        self._params[name][...] = value

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = np.asarray(value, dtype=self.dtype).copy()

    def buffer(self, name: str, default: Optional[np.ndarray] = None) -> np.ndarray:
        if name not in self._buffers:
            assert default is not None, f"Buffer {name} not set"
            return default
        return self._buffers[name]

    def parameters(self, prefix: str = "") -> Iterable[Tuple[str, np.ndarray, np.ndarray]]:
        for name in self.names(prefix):
            yield name, self._params[name], self._grads[name]

    def grad_norm(self, prefix: str = "") -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for _, _, g in self.parameters(prefix))))

    def state_dict(self) -> Dict[str, np.ndarray]:
        """All tensors keyed by name, buffers prefixed with `buffer:`."""
        state = {name: value.copy() for name, value in self._params.items()}
        state.update({f"buffer:{name}": value.copy() for name, value in self._buffers.items()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        param_names = {name for name in state if not name.startswith("buffer:")}
        if strict and param_names != set(self._params):
            missing = sorted(set(self._params) - param_names)
            unexpected = sorted(param_names - set(self._params))
            raise ShapeError(f"State mismatch: missing {missing}, unexpected {unexpected}")

        for name, value in state.items():
            if name.startswith("buffer:"):
                self.set_buffer(name[len("buffer:"):], value)
            elif name in self._params:
                self.set(name, value.astype(self.dtype))

    def astype(self, dtype: str) -> "ParamStore":
        converted = ParamStore(seed=self.seed, dtype=dtype)
        for name, value in self._params.items():
            converted._params[name] = value.astype(converted.dtype)
            converted._grads[name] = np.zeros_like(converted._params[name])
        for name, value in self._buffers.items():
            converted._buffers[name] = value.astype(converted.dtype)
        return converted
