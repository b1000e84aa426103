# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import dataclasses
from typing import List, Optional

from motioncompose.composer.common import CompositionSpec, CompositionTerm
from motioncompose.composer.fusion import FusionDiagnostics
from motioncompose.composer.pipeline import compose_pipeline
from motioncompose.denoiser.energy_attention import AgdConfig
from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.sampler import SamplerConfig
from motioncompose.diffusion.schedule import NoiseSchedule
from motioncompose.motion_vae.model import MotionVAE
from motioncompose.toymotion.common import ConceptDescription, MotionSequence


SINGLE_DESCRIPTION_LAMBDAS = (0.0, 0.0, 1.0)


class MotionGenerator:
    """Loaded models plus sampler settings; every call is deterministic in its `seed`."""

    def __init__(
        self, denoiser: Denoiser, schedule: NoiseSchedule, sampler: SamplerConfig, vae: Optional[MotionVAE] = None,
    ) -> None:
        self.denoiser: Denoiser = denoiser
        self.schedule: NoiseSchedule = schedule
        self.sampler: SamplerConfig = dataclasses.replace(sampler, substrate=denoiser.substrate)
        self.vae: Optional[MotionVAE] = vae

    def single_spec(
        self, desc: ConceptDescription, seed: int, length: int, agd: Optional[AgdConfig] = None,
    ) -> CompositionSpec:
        """Plain classifier-free guidance on one description, expressed as a joint-only fusion."""
        return CompositionSpec(
            terms=[CompositionTerm(desc)], joint_desc=desc, lambdas=SINGLE_DESCRIPTION_LAMBDAS,
            agd=agd if agd is not None else AgdConfig(), sampler=dataclasses.replace(self.sampler, seed=seed),
            length=length,
        )

    def generate(
        self, desc: ConceptDescription, count: int, seed: int, length: int, agd: Optional[AgdConfig] = None,
    ) -> List[MotionSequence]:
        return self.compose(self.single_spec(desc, seed, length, agd), count)

    def compose(
        self, spec: CompositionSpec, count: int = 1, diagnostics: Optional[FusionDiagnostics] = None,
    ) -> List[MotionSequence]:
        return compose_pipeline(spec, self.denoiser, self.schedule, self.vae, count, diagnostics)
