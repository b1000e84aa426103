# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from motioncompose.composer.common import (
    CompositionSpec, CompositionTerm, Polarity, joint_description, load_spec, save_spec, semantic_weights,
    spec_from_dict, spec_to_dict,
)
from motioncompose.composer.fusion import (
    FusionDiagnostics, combine_branches, fusion_branches, make_fusion_score_fn, synergistic_fusion,
)
from motioncompose.composer.latent import latent_branch, latent_conjunction, latent_negation
from motioncompose.composer.pipeline import compose_pipeline, temporal_pipeline
from motioncompose.composer.semantic import SemanticMixer, semantic_compose
from motioncompose.composer.temporal import make_temporal_score_fn, seam_transition_ratio, temporal_compose


__all__ = [
    "CompositionSpec", "CompositionTerm", "FusionDiagnostics", "Polarity", "SemanticMixer", "combine_branches",
    "compose_pipeline", "fusion_branches", "joint_description", "latent_branch", "latent_conjunction",
    "latent_negation", "load_spec", "make_fusion_score_fn", "make_temporal_score_fn", "save_spec",
    "seam_transition_ratio", "semantic_compose", "semantic_weights", "spec_from_dict", "spec_to_dict",
    "synergistic_fusion", "temporal_compose", "temporal_pipeline",
]
