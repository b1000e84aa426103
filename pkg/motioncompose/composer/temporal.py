# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Callable, Optional

import numpy as np

from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.guidance import cfg_score
from motioncompose.toymotion.common import MAX_LENGTH, ConceptDescription, frame_differences
from motioncompose.utils.errors import InvalidInputError, ShapeError


def temporal_compose(
    scores_1: np.ndarray, scores_2: np.ndarray, overlap_scores: np.ndarray, overlap: int,
) -> np.ndarray:
    """Stitch two segment scores along the frame axis (−2).

    Frames of the overlap window get scores_1[L1−N′:] + scores_2[:N′] − overlap_scores; all other frames are copied
    from their own segment. The result has L1 + L2 − N′ frames.
    """
    l1, l2 = scores_1.shape[-2], scores_2.shape[-2]
    if not 0 <= overlap <= min(l1, l2):
        raise InvalidInputError(f"Overlap should be in [0, {min(l1, l2)}] but {overlap} was given")
    if overlap_scores.shape[-2] != overlap or overlap_scores.shape[-1] != scores_1.shape[-1]:
        raise ShapeError(f"Overlap scores {overlap_scores.shape} do not match overlap {overlap}")
    if scores_1.shape[-1] != scores_2.shape[-1]:
        raise ShapeError(f"Segment channels differ: {scores_1.shape} vs {scores_2.shape}")

    seam = scores_1[..., l1 - overlap:, :] + scores_2[..., :overlap, :] - overlap_scores
    return np.concatenate([scores_1[..., :l1 - overlap, :], seam, scores_2[..., overlap:, :]], axis=-2)


def make_temporal_score_fn(
    denoiser: Denoiser, desc_1: ConceptDescription, desc_2: ConceptDescription, length_1: int, length_2: int,
    overlap: int, guidance_weight: float,
) -> Callable[[np.ndarray, int], np.ndarray]:
    """Score of a (…, L1 + L2 − N′, d_m) sequence made of two guided segments; the overlap window's double count is
    removed with the unconditional score of that window.
    """
    if denoiser.substrate != "sequence":
        raise InvalidInputError("Temporal composition runs on the sequence substrate")
    if not 0 <= overlap <= min(length_1, length_2):
        raise InvalidInputError(f"Overlap should be in [0, {min(length_1, length_2)}] but {overlap} was given")
    if max(length_1, length_2) > MAX_LENGTH:
        raise InvalidInputError(f"Segment lengths should not exceed {MAX_LENGTH}")

    c_1, c_2 = denoiser.embedder.embed(desc_1), denoiser.embedder.embed(desc_2)
    null = denoiser.embedder.null()
    start_2 = length_1 - overlap

    def score_fn(x_t: np.ndarray, t: int) -> np.ndarray:
        if x_t.shape[-2] != length_1 + length_2 - overlap:
            raise ShapeError(f"Expected {length_1 + length_2 - overlap} frames but got {x_t.shape[-2]}")
        scores_1 = cfg_score(denoiser, x_t[..., :length_1, :], t, c_1, guidance_weight)
        scores_2 = cfg_score(denoiser, x_t[..., start_2:, :], t, c_2, guidance_weight)
        if overlap > 0:
            overlap_scores = denoiser.predict_eps(x_t[..., start_2:length_1, :], t, null)
        else:
            overlap_scores = np.zeros(x_t.shape[:-2] + (0, x_t.shape[-1]))
        return temporal_compose(scores_1, scores_2, overlap_scores, overlap)

    return score_fn


def seam_transition_ratio(frames: np.ndarray, length_1: int, overlap: int, window: Optional[int] = None) -> float:
    """Mean frame-to-frame distance around the seam window divided by the mean over the rest of the sequence."""
    steps = np.linalg.norm(frame_differences(frames), axis=-1)
    window = max(overlap, 2) if window is None else window
    lo = max(0, length_1 - overlap - 1)
    hi = min(len(steps), length_1 - overlap + window)
    seam = steps[lo:hi]
    rest = np.concatenate([steps[:lo], steps[hi:]])
    if len(rest) == 0 or float(rest.mean()) == 0.0:
        return float("inf") if float(seam.mean()) > 0 else 1.0
    return float(seam.mean() / rest.mean())
