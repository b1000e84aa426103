# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from dataclasses import dataclass
from typing import Dict

from motioncompose.toymotion.common import MAX_LENGTH
from motioncompose.utils.errors import ConfigError


@dataclass
class ModelProfile:
    """Shapes shared by the motion VAE and the denoiser."""
    name: str = "desk"
    latent_tokens: int = 5
    dim: int = 64
    layers: int = 4
    heads: int = 4
    ff_mult: int = 2
    max_length: int = MAX_LENGTH

    def __post_init__(self) -> None:
        if self.dim % self.heads != 0 or self.dim % 2 != 0:
            raise ConfigError(f"dim={self.dim} must be even and divisible by heads={self.heads}")
        if min(self.latent_tokens, self.layers, self.heads, self.ff_mult) < 1:
            raise ConfigError(f"Invalid model profile: {self}")


PROFILES: Dict[str, ModelProfile] = {
    "desk": ModelProfile(name="desk", latent_tokens=5, dim=64, layers=4, heads=4),
    "full": ModelProfile(name="full", latent_tokens=5, dim=256, layers=9, heads=4),
}
