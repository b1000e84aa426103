# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from contextlib import contextmanager
from typing import List, Optional

import numpy as np

from motioncompose.composer.common import CompositionSpec
from motioncompose.composer.fusion import FusionDiagnostics, make_fusion_score_fn
from motioncompose.composer.temporal import make_temporal_score_fn
from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.sampler import SamplerConfig, sample
from motioncompose.diffusion.schedule import NoiseSchedule
from motioncompose.motion_vae.model import MotionVAE
from motioncompose.numerics.functional import wrap_angle
from motioncompose.toymotion.common import ANGLE_CHANNELS, MAX_LENGTH, ConceptDescription, MotionSequence, check_length
from motioncompose.utils.errors import InvalidInputError, MotionComposeError


@contextmanager
def pipeline_stage(name: str):
    """Tags errors escaping the block with the stage they failed in."""
    try:
        yield
    except MotionComposeError as e:
        if getattr(e, "stage", None) is None:
            e.stage = name
        raise


def frames_to_motion(denoiser: Denoiser, frames: np.ndarray, metadata: dict) -> MotionSequence:
    frames = denoiser.denormalize(frames)
    frames[:, list(ANGLE_CHANNELS)] = wrap_angle(frames[:, list(ANGLE_CHANNELS)])
    return MotionSequence(frames=frames, metadata=metadata)


def compose_pipeline(
    spec: CompositionSpec, denoiser: Denoiser, schedule: NoiseSchedule, vae: Optional[MotionVAE] = None,
    count: int = 1, diagnostics: Optional[FusionDiagnostics] = None,
) -> List[MotionSequence]:
    """Fused score -> reverse diffusion (all `count` chains in one batch) -> decode (latent) or denormalize (sequence)."""
    if count < 1:
        raise InvalidInputError(f"count should be positive but {count} was given")
    if spec.sampler.substrate != denoiser.substrate:
        raise InvalidInputError(f"Spec targets the {spec.sampler.substrate} substrate but the denoiser is {denoiser.substrate}")

    with pipeline_stage("score"):
        score_fn = make_fusion_score_fn(denoiser, spec, diagnostics)
    metadata = {"composition": [term.desc.to_text() for term in spec.terms], "seed": spec.sampler.seed}

    if denoiser.substrate == "latent":
        if vae is None:
            raise InvalidInputError("The latent substrate needs a VAE to decode samples")
        with pipeline_stage("sample"):
            z = sample(score_fn, spec.sampler, schedule, (count,) + vae.latent_shape)
        with pipeline_stage("decode"):
            motions = [vae.decode(z_i / vae.latent_scale, spec.length) for z_i in z]
        for motion in motions:
            motion.metadata.update(metadata)
        return motions

    with pipeline_stage("sample"):
        frames = sample(score_fn, spec.sampler, schedule, (count, spec.length, denoiser.token_dim))
    with pipeline_stage("decode"):
        return [frames_to_motion(denoiser, f, dict(metadata)) for f in frames]


def temporal_pipeline(
    denoiser: Denoiser, schedule: NoiseSchedule, desc_1: ConceptDescription, desc_2: ConceptDescription,
    length_1: int, length_2: int, overlap: int, sampler: SamplerConfig, count: int = 1,
) -> List[MotionSequence]:
    """Two described segments generated jointly into one sequence of L1 + L2 − N′ frames."""
    check_length(length_1)
    check_length(length_2)
    total = length_1 + length_2 - overlap
    if total > MAX_LENGTH:
        raise InvalidInputError(f"Stitched length {total} exceeds {MAX_LENGTH}")

    with pipeline_stage("score"):
        score_fn = make_temporal_score_fn(
            denoiser, desc_1, desc_2, length_1, length_2, overlap, sampler.guidance_weight,
        )
    with pipeline_stage("sample"):
        frames = sample(score_fn, sampler, schedule, (count, total, denoiser.token_dim))
    metadata = {"segments": [desc_1.to_text(), desc_2.to_text()], "overlap": overlap, "seed": sampler.seed}
    with pipeline_stage("decode"):
        return [frames_to_motion(denoiser, f, dict(metadata)) for f in frames]
