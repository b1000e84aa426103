# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import dacite
import numpy as np
import yaml

from motioncompose.denoiser.energy_attention import AgdConfig
from motioncompose.diffusion.sampler import SamplerConfig, SamplerKind
from motioncompose.toymotion.common import ConceptDescription, check_length
from motioncompose.utils.errors import ConfigError, DegenerateWeightsError, InvalidInputError


DEGENERATE_WEIGHT_SUM: float = 1e-6
LAMBDA_SUM_TOLERANCE: float = 1e-9
# (λ_l, λ_s, λ_m): latent-aware, semantic-aware, joint-description.
DEFAULT_LAMBDAS: Tuple[float, float, float] = (0.1, 0.7, 0.2)
DEFAULT_LENGTH: int = 120


class Polarity(Enum):
    conjoin = "conjoin"
    negate = "negate"


@dataclass
class CompositionTerm:
    desc: ConceptDescription
    weight: float = 1.0
    polarity: Polarity = Polarity.conjoin

    def __post_init__(self) -> None:
        self.polarity = Polarity(self.polarity)
        if not math.isfinite(self.weight):
            raise InvalidInputError(f"Term weight should be finite but {self.weight} was given")

    @property
    def semantic_weight(self) -> float:
        """Signed weight of the attention mix: positive to conjoin, negative to negate."""
        return self.weight if self.polarity == Polarity.conjoin else -self.weight


def semantic_weights(terms: List[CompositionTerm]) -> np.ndarray:
    weights = np.array([term.semantic_weight for term in terms], dtype=np.float64)
    if abs(float(weights.sum())) <= DEGENERATE_WEIGHT_SUM:
        raise DegenerateWeightsError(f"Signed semantic weights {weights.tolist()} sum to ~0")
    return weights


@dataclass
class CompositionSpec:
    terms: List[CompositionTerm]
    joint_desc: Optional[ConceptDescription] = None
    lambdas: Tuple[float, float, float] = DEFAULT_LAMBDAS
    agd: AgdConfig = field(default_factory=AgdConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    length: int = DEFAULT_LENGTH

    def __post_init__(self) -> None:
        self.lambdas = tuple(float(v) for v in self.lambdas)
        if len(self.lambdas) != 3 or any(v < 0 for v in self.lambdas):
            raise InvalidInputError(f"Need three non-negative lambdas but got {self.lambdas}")
        if abs(sum(self.lambdas) - 1.0) > LAMBDA_SUM_TOLERANCE:
            raise InvalidInputError(f"Lambdas {self.lambdas} should sum to 1")
        if not any(term.polarity == Polarity.conjoin for term in self.terms):
            raise InvalidInputError("A composition needs at least one conjoin term")
        if self.lambda_joint > 0 and self.joint_desc is None:
            raise InvalidInputError("λ_m > 0 needs a joint description")
        if self.lambda_semantic > 0:
            semantic_weights(self.terms)
        check_length(self.length)

    @property
    def lambda_latent(self) -> float:
        return self.lambdas[0]

    @property
    def lambda_semantic(self) -> float:
        return self.lambdas[1]

    @property
    def lambda_joint(self) -> float:
        return self.lambdas[2]

    @property
    def conjoin_terms(self) -> List[CompositionTerm]:
        return [term for term in self.terms if term.polarity == Polarity.conjoin]

    @property
    def negate_terms(self) -> List[CompositionTerm]:
        return [term for term in self.terms if term.polarity == Polarity.negate]


def joint_description(terms: List[CompositionTerm]) -> ConceptDescription:
    """Joint description c_{1,n}: all conjoin tokens in term order."""
    joint = ConceptDescription()
    for term in terms:
        if term.polarity == Polarity.conjoin:
            joint = joint.merge(term.desc)
    return joint


##### Spec file (YAML) #####

def spec_to_dict(spec: CompositionSpec) -> dict:
    return {
        "terms": [
            {"description": term.desc.to_text(), "weight": term.weight, "polarity": term.polarity.value}
            for term in spec.terms
        ],
        "joint_description": None if spec.joint_desc is None else spec.joint_desc.to_text(),
        "lambdas": {"latent": spec.lambda_latent, "semantic": spec.lambda_semantic, "joint": spec.lambda_joint},
        "agd": {"gamma_attn": spec.agd.gamma_attn, "gamma_reg": spec.agd.gamma_reg, "regularizer": spec.agd.regularizer},
        "sampler": {
            "substrate": spec.sampler.substrate, "steps": spec.sampler.steps,
            "guidance_weight": spec.sampler.guidance_weight, "sampler": spec.sampler.sampler.value,
            "seed": spec.sampler.seed,
        },
        "length": spec.length,
    }


SPEC_KEYS = {"terms", "joint_description", "lambdas", "agd", "sampler", "length"}


def spec_from_dict(data: dict) -> CompositionSpec:
    unknown = set(data) - SPEC_KEYS
    if len(unknown) > 0:
        raise ConfigError(f"Unknown keys in composition spec: {sorted(unknown)}")
    dacite_config = dacite.Config(strict=True, cast=[Enum, tuple, float])

    try:
        terms = []
        for item in data["terms"]:
            extra = set(item) - {"description", "weight", "polarity"}
            if len(extra) > 0:
                raise ConfigError(f"Unknown keys in composition term: {sorted(extra)}")
            terms.append(CompositionTerm(
                desc=ConceptDescription.from_text(item["description"]),
                weight=float(item.get("weight", 1.0)),
                polarity=Polarity(item.get("polarity", "conjoin")),
            ))

        joint_text = data.get("joint_description")
        lambdas = data.get("lambdas", {})
        if set(lambdas) - {"latent", "semantic", "joint"}:
            raise ConfigError(f"Unknown lambda names: {sorted(set(lambdas) - {'latent', 'semantic', 'joint'})}")
        default_l, default_s, default_m = DEFAULT_LAMBDAS

        return CompositionSpec(
            terms=terms,
            joint_desc=None if joint_text is None else ConceptDescription.from_text(joint_text),
            lambdas=(
                float(lambdas.get("latent", default_l)), float(lambdas.get("semantic", default_s)),
                float(lambdas.get("joint", default_m)),
            ),
            agd=dacite.from_dict(AgdConfig, data.get("agd", {}), config=dacite_config),
            sampler=dacite.from_dict(SamplerConfig, data.get("sampler", {}), config=dacite_config),
            length=int(data.get("length", DEFAULT_LENGTH)),
        )
    except KeyError as e:
        raise ConfigError(f"Missing key in composition spec: {e}")
    except (ValueError, dacite.DaciteError) as e:
        if isinstance(e, (ConfigError, InvalidInputError)):
            raise
        raise ConfigError(f"Invalid composition spec: {e}")


def load_spec(path: str) -> CompositionSpec:
    try:
        with open(path, "r", encoding="utf-8") as fin:
            data = yaml.safe_load(fin)
    except OSError as e:
        raise ConfigError(f"Cannot read composition spec {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Composition spec {path} should be a mapping")
    return spec_from_dict(data)


def save_spec(spec: CompositionSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fout:
        yaml.safe_dump(spec_to_dict(spec), fout, sort_keys=False)
    return
