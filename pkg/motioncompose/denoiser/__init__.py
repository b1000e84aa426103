# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from motioncompose.denoiser.concept_embedding import ConceptEmbedder, embed_description
from motioncompose.denoiser.energy_attention import (
    MULTI_CONCEPT_AGD, AgdConfig, EnergyCrossAttention, attention_term, energy_cross_attention, key_energy,
    query_key_energy, regularizer_term,
)
from motioncompose.denoiser.hopfield import hopfield_energy, hopfield_update
from motioncompose.denoiser.model import Denoiser, MixHook, TapHook


__all__ = [
    "AgdConfig", "ConceptEmbedder", "Denoiser", "EnergyCrossAttention", "MULTI_CONCEPT_AGD", "MixHook", "TapHook",
    "attention_term", "embed_description", "energy_cross_attention", "hopfield_energy", "hopfield_update",
    "key_energy", "query_key_energy", "regularizer_term",
]
