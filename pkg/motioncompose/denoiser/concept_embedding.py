# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import List, Optional, Tuple

import numpy as np

from motioncompose.numerics.layers import Cache, Module
from motioncompose.numerics.param_store import ParamStore
from motioncompose.toymotion.common import VOCABULARY, ConceptDescription, ConceptToken
from motioncompose.utils.errors import InvalidInputError


class ConceptEmbedder(Module):
    """Learned concept-token table standing in for a text encoder.

    A token (family, mode, magnitude) maps to `table[v] + (magnitude − 1) · magnitude_dir[v]`, where v is its
    vocabulary index. The empty description maps to the single learned `null` row (unconditional).
    """

    def __init__(self, store: ParamStore, name: str, dim: int) -> None:
        super().__init__(store, name)
        self.dim: int = dim
        store.create(f"{name}.table", (len(VOCABULARY), dim), scale=1.0)
        store.create(f"{name}.magnitude", (len(VOCABULARY), dim), scale=0.1)
        store.create(f"{name}.null", (1, dim), scale=1.0)

    def _token_row(self, token: ConceptToken) -> np.ndarray:
        idx = token.vocab_index
        return self._param("table")[idx] + (token.magnitude - 1.0) * self._param("magnitude")[idx]

    def embed(self, desc: ConceptDescription) -> np.ndarray:
        if not isinstance(desc, ConceptDescription):
            raise InvalidInputError(f"Expected a ConceptDescription but got {type(desc).__name__}")
        if len(desc) == 0:
            return self.null()
        return np.stack([self._token_row(token) for token in desc.tokens])

    def null(self) -> np.ndarray:
        return self._param("null").copy()

    def embed_batch(
        self, descs: List[ConceptDescription], drop: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, np.ndarray, Cache]:
        """Padded embeddings (B, T_max, d) and key mask (B, T_max); rows with `drop` set become unconditional."""
        drop = np.zeros(len(descs), dtype=bool) if drop is None else np.asarray(drop, dtype=bool)
        used = [ConceptDescription() if dropped else desc for desc, dropped in zip(descs, drop)]
        rows = [self.embed(desc) for desc in used]

        max_tokens = max(len(r) for r in rows)
        c = np.zeros((len(rows), max_tokens, self.dim), dtype=self._param("table").dtype)
        mask = np.zeros((len(rows), max_tokens), dtype=bool)
        for idx, r in enumerate(rows):
            c[idx, :len(r)] = r
            mask[idx, :len(r)] = True
        return c, mask, {"descs": used}

    def backward(self, grad_c: np.ndarray, cache: Cache) -> None:
        g_table = np.zeros_like(self._param("table"))
        g_magnitude = np.zeros_like(self._param("magnitude"))
        g_null = np.zeros_like(self._param("null"))
        for row_grads, desc in zip(grad_c, cache["descs"]):
            if len(desc) == 0:
                g_null[0] += row_grads[0]
                continue
            for pos, token in enumerate(desc.tokens):
                g_table[token.vocab_index] += row_grads[pos]
                g_magnitude[token.vocab_index] += (token.magnitude - 1.0) * row_grads[pos]

        self._accumulate("table", g_table)
        self._accumulate("magnitude", g_magnitude)
        self._accumulate("null", g_null)
        return


def embed_description(desc: ConceptDescription, embedder: ConceptEmbedder) -> np.ndarray:
    """N^t × d concept embedding; a single null row for the empty description."""
    return embedder.embed(desc)
