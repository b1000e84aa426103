# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import List, Optional

import numpy as np

from motioncompose.composer.common import CompositionTerm, Polarity
from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.guidance import guided_sum
from motioncompose.utils.errors import InvalidInputError


def _predict(denoiser: Denoiser, z_t: np.ndarray, t: int, term: CompositionTerm, **kwargs) -> np.ndarray:
    return denoiser.predict_eps(z_t, t, denoiser.embedder.embed(term.desc), **kwargs)


def latent_conjunction(
    denoiser: Denoiser, z_t: np.ndarray, t: int, terms: List[CompositionTerm], uncond: Optional[np.ndarray] = None,
    **kwargs,
) -> np.ndarray:
    """ε(z_t, t) + Σ_i w_i (ε(z_t, t, c_i) − ε(z_t, t)), with the unconditional score computed once."""
    if len(terms) == 0:
        raise InvalidInputError("Conjunction needs at least one term")
    if any(term.polarity != Polarity.conjoin for term in terms):
        raise InvalidInputError("latent_conjunction only takes conjoin terms")

    if uncond is None:
        uncond = denoiser.predict_eps(z_t, t, denoiser.embedder.null(), **kwargs)
    return guided_sum(uncond, [(term.weight, _predict(denoiser, z_t, t, term, **kwargs), uncond) for term in terms])


def latent_negation(
    denoiser: Denoiser, z_t: np.ndarray, t: int, positive: CompositionTerm, negative: CompositionTerm, w: float,
    uncond: Optional[np.ndarray] = None, **kwargs,
) -> np.ndarray:
    """ε(z_t, t) + w (ε(z_t, t, c_i) − ε(z_t, t, c_j))."""
    if not w >= 0:
        raise InvalidInputError(f"Negation weight should be non-negative but {w} was given")
    if uncond is None:
        uncond = denoiser.predict_eps(z_t, t, denoiser.embedder.null(), **kwargs)
    cond_pos = _predict(denoiser, z_t, t, positive, **kwargs)
    cond_neg = _predict(denoiser, z_t, t, negative, **kwargs)
    return guided_sum(uncond, [(w, cond_pos, cond_neg)])


def latent_branch(
    denoiser: Denoiser, z_t: np.ndarray, t: int, terms: List[CompositionTerm], uncond: Optional[np.ndarray] = None,
    **kwargs,
) -> np.ndarray:
    """Mixed polarities: conjunction over the conjoin terms, then for every negate term j a negation delta
    w_j (ε(c_s) − ε(c_j)) against the strongest conjoin term s (largest weight, first on ties).

    Without negate terms this is `latent_conjunction`, bit for bit.
    """
    conjoin = [term for term in terms if term.polarity == Polarity.conjoin]
    negate = [term for term in terms if term.polarity == Polarity.negate]
    if len(conjoin) == 0:
        raise InvalidInputError("The latent branch needs at least one conjoin term")

    if uncond is None:
        uncond = denoiser.predict_eps(z_t, t, denoiser.embedder.null(), **kwargs)
    cond = [_predict(denoiser, z_t, t, term, **kwargs) for term in conjoin]
    deltas = [(term.weight, eps, uncond) for term, eps in zip(conjoin, cond)]

    strongest = int(np.argmax([term.weight for term in conjoin]))
    for term in negate:
        deltas.append((term.weight, cond[strongest], _predict(denoiser, z_t, t, term, **kwargs)))
    return guided_sum(uncond, deltas)
