# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Callable, Dict, List, Optional

import numpy as np

from motioncompose.composer.common import CompositionSpec
from motioncompose.composer.latent import latent_branch
from motioncompose.composer.semantic import semantic_compose
from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.guidance import guided_sum


BRANCH_NAMES = ("latent", "semantic", "joint")


class FusionDiagnostics:
    """Per-step record of branch norms and the λ actually used."""

    def __init__(self) -> None:
        self.records: List[dict] = []

    def record(self, t: int, lambdas: tuple, branches: Dict[str, np.ndarray], fused: np.ndarray) -> None:
        entry = {"step": int(t), "fused_norm": float(np.linalg.norm(fused))}
        for name, lam in zip(BRANCH_NAMES, lambdas):
            entry[f"lambda_{name}"] = float(lam)
            entry[f"{name}_norm"] = float(np.linalg.norm(branches[name])) if name in branches else None
        self.records.append(entry)
        return


def fusion_branches(denoiser: Denoiser, z_t: np.ndarray, t: int, spec: CompositionSpec, **kwargs) -> Dict[str, np.ndarray]:
    """Branch scores with a positive λ. The semantic and joint branches get classifier-free guidance with the
    sampler's guidance weight (weight 1 leaves their conditional scores as they are); the latent branch is guided by
    the term weights themselves.
    """
    w = spec.sampler.guidance_weight
    uncond = denoiser.predict_eps(z_t, t, denoiser.embedder.null(), **kwargs)

    branches: Dict[str, np.ndarray] = {}
    if spec.lambda_latent > 0:
        branches["latent"] = latent_branch(denoiser, z_t, t, spec.terms, uncond=uncond, **kwargs)
    if spec.lambda_semantic > 0:
        mixed = semantic_compose(denoiser, z_t, t, spec.terms, agd=spec.agd, **kwargs)
        branches["semantic"] = guided_sum(uncond, [(w, mixed, uncond)])
    if spec.lambda_joint > 0:
        joint = denoiser.predict_eps(z_t, t, denoiser.embedder.embed(spec.joint_desc), agd=spec.agd, **kwargs)
        branches["joint"] = guided_sum(uncond, [(w, joint, uncond)])
    return branches


def combine_branches(lambdas: tuple, branches: Dict[str, np.ndarray]) -> np.ndarray:
    """Σ_b λ_b branch_b over the branches with λ_b > 0, accumulated in the fixed branch order."""
    fused = 0.0
    for name, lam in zip(BRANCH_NAMES, lambdas):
        if lam > 0:
            fused = fused + lam * branches[name]
    return fused


def synergistic_fusion(
    denoiser: Denoiser, z_t: np.ndarray, t: int, spec: CompositionSpec,
    diagnostics: Optional[FusionDiagnostics] = None, **kwargs,
) -> np.ndarray:
    """λ_l · latent branch + λ_s · semantic branch + λ_m · joint-description branch."""
    branches = fusion_branches(denoiser, z_t, t, spec, **kwargs)
    fused = combine_branches(spec.lambdas, branches)
    if diagnostics is not None:
        diagnostics.record(t, spec.lambdas, branches, fused)
    return fused


def make_fusion_score_fn(
    denoiser: Denoiser, spec: CompositionSpec, diagnostics: Optional[FusionDiagnostics] = None, **kwargs,
) -> Callable[[np.ndarray, int], np.ndarray]:
    return lambda z_t, t: synergistic_fusion(denoiser, z_t, t, spec, diagnostics, **kwargs)
