# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

from typing import Dict

import numpy as np

from motioncompose.numerics.functional import wrap_angle
from motioncompose.numerics.rng import SeedLike, make_rng
from motioncompose.toymotion.common import (
    DEFAULT_FRAME_RATE, MOTION_DIM, Channel, ConceptDescription, ConceptFamily, ConceptToken, MotionSequence,
    check_length,
)
from motioncompose.utils.errors import InvalidInputError


# Per-frame displacement of straight walks at magnitude 1.
WALK_STEP: float = 0.04
CIRCLE_RADIUS: float = 0.6
CIRCLE_RATE: float = np.pi  # rad / s
LIMB_RAISE: float = 1.0
LIMB_DOWN: float = -1.0
WAVE_AMPLITUDE: float = 0.6
WAVE_FREQUENCY: float = 1.0  # Hz
HOP_HEIGHT: float = 0.2
HOP_FREQUENCY: float = 2.0  # hops / s

# Standard deviation of the per-channel Gaussian noise at noise_level = 1.
NOISE_SCALES: np.ndarray = np.array([0.05, 0.05, 0.2, 0.5, 0.5, 0.05])

HEADINGS: Dict[str, float] = {"+x": 0.0, "-x": np.pi, "+y": np.pi / 2, "-y": -np.pi / 2}


def _direction_channels(token: ConceptToken, time: np.ndarray, frame_rate: float) -> np.ndarray:
    n = len(time)
    out = np.zeros((n, 3))
    if token.mode == "circle":
        radius = CIRCLE_RADIUS * token.magnitude
        phase = CIRCLE_RATE * time
        out[:, 0] = radius * np.sin(phase)
        out[:, 1] = radius * (1.0 - np.cos(phase))
        out[:, 2] = phase
        return out

    heading = HEADINGS[token.mode]
    distance = WALK_STEP * token.magnitude * np.arange(n)
    if token.mode in ("+x", "-x"):
        out[:, 0] = distance if token.mode == "+x" else -distance
    else:
        out[:, 1] = distance if token.mode == "+y" else -distance
    out[:, 2] = heading
    return out


def _limb_channel(token: ConceptToken, time: np.ndarray) -> np.ndarray:
    if token.mode == "raise":
        return np.full(len(time), LIMB_RAISE * token.magnitude)
    if token.mode == "down":
        return np.full(len(time), LIMB_DOWN * token.magnitude)
    return WAVE_AMPLITUDE * token.magnitude * np.sin(2 * np.pi * WAVE_FREQUENCY * time)


def _bounce_channel(token: ConceptToken, time: np.ndarray) -> np.ndarray:
    if token.mode == "none":
        return np.zeros(len(time))
    return HOP_HEIGHT * token.magnitude * np.abs(np.sin(np.pi * HOP_FREQUENCY * time))


def synthesize_motion(
    desc: ConceptDescription, length: int, noise_level: float = 0.0, seed: SeedLike = 0,
    frame_rate: float = DEFAULT_FRAME_RATE,
) -> MotionSequence:
    """Generate the ground-truth motion of a description.

    Each family writes only its own channels; families absent from the description stay neutral (standing still,
    limbs at rest, no bounce). Gaussian noise with family-specific scale is added on top.
    """
    length = check_length(length)
    if not 0.0 <= noise_level <= 0.2:
        raise InvalidInputError(f"noise_level should be in [0, 0.2] but {noise_level} was given")
    if not isinstance(desc, ConceptDescription):
        raise InvalidInputError(f"Expected a ConceptDescription but {type(desc)} was given")

    time = np.arange(length) / frame_rate
    frames = np.zeros((length, MOTION_DIM))

    for token in desc.tokens:
        if token.family == ConceptFamily.direction:
            frames[:, Channel.X:Channel.HEADING + 1] = _direction_channels(token, time, frame_rate)
        elif token.family == ConceptFamily.left_limb:
            frames[:, Channel.LEFT_LIMB] = _limb_channel(token, time)
        elif token.family == ConceptFamily.right_limb:
            frames[:, Channel.RIGHT_LIMB] = _limb_channel(token, time)
        elif token.family == ConceptFamily.bounce:
            frames[:, Channel.BOUNCE] = _bounce_channel(token, time)

    if noise_level > 0:
        noise = make_rng(seed, "synthesize").standard_normal(frames.shape)
        frames = frames + noise * NOISE_SCALES * noise_level

    for channel in (Channel.HEADING, Channel.LEFT_LIMB, Channel.RIGHT_LIMB):
        frames[:, channel] = wrap_angle(frames[:, channel])

    return MotionSequence(frames=frames, frame_rate=frame_rate, metadata={"description": desc.to_text()})
