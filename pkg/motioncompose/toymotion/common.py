# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

from motioncompose.numerics.functional import wrap_angle
from motioncompose.utils.errors import InvalidInputError


MIN_LENGTH: int = 40
MAX_LENGTH: int = 196
MOTION_DIM: int = 6
DEFAULT_FRAME_RATE: float = 20.0
MIN_MAGNITUDE: float = 0.5
MAX_MAGNITUDE: float = 1.5


class Channel:
    X = 0
    Y = 1
    HEADING = 2
    LEFT_LIMB = 3
    RIGHT_LIMB = 4
    BOUNCE = 5


CHANNEL_NAMES: List[str] = ["x", "y", "heading", "left_limb", "right_limb", "bounce"]
ANGLE_CHANNELS: Tuple[int, ...] = (Channel.HEADING, Channel.LEFT_LIMB, Channel.RIGHT_LIMB)


class ConceptFamily(Enum):
    direction = "direction"
    left_limb = "left-limb"
    right_limb = "right-limb"
    bounce = "bounce"


FAMILY_MODES: Dict[ConceptFamily, List[str]] = {
    ConceptFamily.direction: ["+x", "-x", "+y", "-y", "circle"],
    ConceptFamily.left_limb: ["raise", "wave", "down"],
    ConceptFamily.right_limb: ["raise", "wave", "down"],
    ConceptFamily.bounce: ["hop", "none"],
}

FAMILY_CHANNELS: Dict[ConceptFamily, Tuple[int, ...]] = {
    ConceptFamily.direction: (Channel.X, Channel.Y, Channel.HEADING),
    ConceptFamily.left_limb: (Channel.LEFT_LIMB,),
    ConceptFamily.right_limb: (Channel.RIGHT_LIMB,),
    ConceptFamily.bounce: (Channel.BOUNCE,),
}

# Stable vocabulary order, used by the concept embedding table and the dataset codec.
VOCABULARY: List[Tuple[ConceptFamily, str]] = [
    (family, mode) for family in ConceptFamily for mode in FAMILY_MODES[family]
]
FAMILY_CODES: Dict[ConceptFamily, int] = {family: idx for idx, family in enumerate(ConceptFamily)}


@dataclass(frozen=True)
class ConceptToken:
    family: ConceptFamily
    mode: str
    magnitude: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.family, ConceptFamily):
            try:
                object.__setattr__(self, "family", ConceptFamily(self.family))
            except ValueError:
                raise InvalidInputError(f"Unknown concept family: {self.family}")
        if self.mode not in FAMILY_MODES[self.family]:
            raise InvalidInputError(f"Mode {self.mode} is not valid for family {self.family.value}")
        if not MIN_MAGNITUDE <= self.magnitude <= MAX_MAGNITUDE:
            raise InvalidInputError(
                f"Magnitude should be in [{MIN_MAGNITUDE}, {MAX_MAGNITUDE}] but {self.magnitude} was given"
            )

    @property
    def vocab_index(self) -> int:
        return VOCABULARY.index((self.family, self.mode))

    def to_text(self) -> str:
        return f"{self.family.value}:{self.mode}@{self.magnitude:g}"

    @staticmethod
    def from_text(text: str) -> "ConceptToken":
        try:
            family_mode, _, magnitude = text.strip().partition("@")
            family, mode = family_mode.split(":")
            return ConceptToken(ConceptFamily(family), mode, float(magnitude) if magnitude else 1.0)
        except ValueError as e:
            raise InvalidInputError(f"Cannot parse concept token '{text}': {e}")


@dataclass(frozen=True)
class ConceptDescription:
    tokens: Tuple[ConceptToken, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        families = [token.family for token in self.tokens]
        if len(families) != len(set(families)):
            raise InvalidInputError(f"Duplicate concept families in description: {[f.value for f in families]}")
        if len(self.tokens) > len(ConceptFamily):
            raise InvalidInputError(f"At most {len(ConceptFamily)} tokens per description")

    def __len__(self) -> int:
        return len(self.tokens)

    def token_for(self, family: ConceptFamily):
        for token in self.tokens:
            if token.family == family:
                return token
        return None

    def merge(self, other: "ConceptDescription") -> "ConceptDescription":
        """Joint description (concatenation of tokens); fails on overlapping families."""
        return ConceptDescription(self.tokens + other.tokens)

    def to_text(self) -> str:
        return " ".join(token.to_text() for token in self.tokens)

    @staticmethod
    def from_text(text: str) -> "ConceptDescription":
        return ConceptDescription(tuple(ConceptToken.from_text(part) for part in text.split()))

    def as_dict(self) -> dict:
        return {"tokens": [{"family": t.family.value, "mode": t.mode, "magnitude": t.magnitude} for t in self.tokens]}


@dataclass
class MotionSequence:
    frames: np.ndarray
    frame_rate: float = DEFAULT_FRAME_RATE
    metadata: dict = field(default_factory=lambda: {})

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 2 or self.frames.shape[1] != MOTION_DIM:
            raise InvalidInputError(f"Frames should be L x {MOTION_DIM} but {self.frames.shape} was given")
        if not MIN_LENGTH <= self.length <= MAX_LENGTH:
            raise InvalidInputError(f"Length should be in [{MIN_LENGTH}, {MAX_LENGTH}] but {self.length} was given")
        if not np.all(np.isfinite(self.frames)):
            raise InvalidInputError("Motion frames contain non-finite values")

    @property
    def length(self) -> int:
        return int(self.frames.shape[0])

    def as_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["frames"] = self.frames.tolist()
        return data


def check_length(length: int) -> int:
    if not MIN_LENGTH <= int(length) <= MAX_LENGTH:
        raise InvalidInputError(f"Length should be in [{MIN_LENGTH}, {MAX_LENGTH}] but {length} was given")
    return int(length)


def pad_frames(frames: List[np.ndarray], max_length: int = None) -> Tuple[np.ndarray, np.ndarray]:
    """Stack variable-length L×d_m frame matrices into (B, L_max, d_m) with a boolean validity mask (B, L_max)."""
    assert len(frames) > 0, "Cannot pad an empty batch"
    lengths = [len(f) for f in frames]
    max_length = max(lengths) if max_length is None else max_length
    assert max(lengths) <= max_length, f"Sequence of length {max(lengths)} exceeds {max_length}"

    dtype = np.result_type(*[f.dtype for f in frames])
    batch = np.zeros((len(frames), max_length, frames[0].shape[-1]), dtype=dtype)
    mask = np.zeros((len(frames), max_length), dtype=bool)
    for idx, f in enumerate(frames):
        batch[idx, :len(f)] = f
        mask[idx, :len(f)] = True
    return batch, mask


def frame_differences(frames: np.ndarray) -> np.ndarray:
    """Consecutive frame differences along the time axis, with angle channels compared on the circle."""
    diffs = np.diff(np.asarray(frames, dtype=np.float64), axis=-2)
    diffs[..., list(ANGLE_CHANNELS)] = wrap_angle(diffs[..., list(ANGLE_CHANNELS)])
    return diffs
