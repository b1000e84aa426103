# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import List, Optional

import numpy as np

from motioncompose.composer.common import CompositionTerm, semantic_weights
from motioncompose.denoiser.energy_attention import AgdConfig
from motioncompose.denoiser.model import Denoiser, TapHook
from motioncompose.utils.errors import InvalidInputError


class SemanticMixer:
    """Merges the cross-attention outputs of concurrent branches as Σ w_i z′_i / Σ w_i at every layer."""

    def __init__(self, weights: np.ndarray) -> None:
        self.weights: np.ndarray = np.asarray(weights, dtype=np.float64)
        self.total: float = float(self.weights.sum())

    def __call__(self, layer_idx: int, outputs: List[np.ndarray]) -> np.ndarray:
        assert len(outputs) == len(self.weights), f"{len(outputs)} branch outputs for {len(self.weights)} weights"
        merged = 0.0
        for weight, out in zip(self.weights, outputs):
            merged = merged + float(weight) * out
        return merged / self.total


def semantic_compose(
    denoiser: Denoiser, z_t: np.ndarray, t: int, terms: List[CompositionTerm], agd: Optional[AgdConfig] = None,
    tap: Optional[TapHook] = None, **kwargs,
) -> np.ndarray:
    """One denoiser pass with a branch per term; branch cross-attention outputs are mixed at every layer."""
    if len(terms) == 0:
        raise InvalidInputError("Semantic composition needs at least one term")
    mixer = SemanticMixer(semantic_weights(terms))
    embeddings = [denoiser.embedder.embed(term.desc) for term in terms]
    return denoiser.predict_eps(z_t, t, embeddings, agd=agd, mix=mixer, tap=tap, **kwargs)
