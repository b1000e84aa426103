# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

"""Analytic concept detectors used as evaluation oracles.

Every score is a logistic function of one motion statistic, so that 0.5 is the decision threshold. The thresholds
sit half-way between the statistic of the weakest concept instance (magnitude 0.5) and the neutral motion.
"""

from typing import Dict

import numpy as np

from motioncompose.numerics.functional import sigmoid, wrap_angle
from motioncompose.toymotion.common import Channel, ConceptDescription, ConceptFamily, ConceptToken, MotionSequence
from motioncompose.toymotion.synthesizer import CIRCLE_RATE, HOP_FREQUENCY, WALK_STEP


PRESENT_THRESHOLD: float = 0.5
# Straight walks: least-squares velocity along the axis, per frame.
VELOCITY_THRESHOLD: float = 0.25 * WALK_STEP
VELOCITY_WIDTH: float = 0.05 * WALK_STEP
# Circles: mean wrapped heading increment per frame, relative to the circle rate.
TURN_THRESHOLD: float = 0.5
TURN_WIDTH: float = 0.1
# Limbs: mean angle (raise / down) and oscillation (wave), rad.
LIMB_MEAN_THRESHOLD: float = 0.25
LIMB_MEAN_WIDTH: float = 0.05
OSCILLATION_THRESHOLD: float = 0.13
OSCILLATION_WIDTH: float = 0.02
# Bounce: amplitude of the strongest non-DC frequency bin around the hop frequency.
HOP_PEAK_THRESHOLD: float = 0.02
HOP_PEAK_WIDTH: float = 0.004


def _logistic(value: float, threshold: float, width: float) -> float:
    return float(sigmoid(np.asarray((value - threshold) / width)))


def axis_velocity(m: MotionSequence) -> np.ndarray:
    """Least-squares slope of (x, y) against the frame index."""
    frame_idx = np.arange(m.length, dtype=np.float64)
    centered = frame_idx - frame_idx.mean()
    positions = m.frames[:, [Channel.X, Channel.Y]]
    return centered @ (positions - positions.mean(axis=0)) / np.sum(centered ** 2)


def turn_rate(m: MotionSequence) -> float:
    """Mean wrapped heading increment, in units of the circle rate."""
    increments = wrap_angle(np.diff(m.frames[:, Channel.HEADING]))
    return float(np.mean(increments) * m.frame_rate / CIRCLE_RATE)


def oscillation_amplitude(signal: np.ndarray) -> float:
    return float(np.std(signal))


def spectral_peak(signal: np.ndarray, frame_rate: float, min_frequency: float = 0.5 * HOP_FREQUENCY) -> float:
    """Largest single-sided amplitude among frequency bins at or above `min_frequency`."""
    centered = signal - signal.mean()
    amplitudes = 2.0 * np.abs(np.fft.rfft(centered)) / len(signal)
    freqs = np.fft.rfftfreq(len(signal), d=1.0 / frame_rate)
    band = freqs >= min_frequency
    return float(amplitudes[band].max(initial=0.0))


def _direction_score(m: MotionSequence, mode: str) -> float:
    circle = _logistic(turn_rate(m), TURN_THRESHOLD, TURN_WIDTH)
    if mode == "circle":
        return circle

    velocity = axis_velocity(m)
    signed = {"+x": velocity[0], "-x": -velocity[0], "+y": velocity[1], "-y": -velocity[1]}[mode]
    return _logistic(signed, VELOCITY_THRESHOLD, VELOCITY_WIDTH) * (1.0 - circle)


def _limb_score(signal: np.ndarray, mode: str) -> float:
    oscillating = _logistic(oscillation_amplitude(signal), OSCILLATION_THRESHOLD, OSCILLATION_WIDTH)
    if mode == "wave":
        return oscillating

    mean = float(np.mean(signal))
    signed = mean if mode == "raise" else -mean
    return _logistic(signed, LIMB_MEAN_THRESHOLD, LIMB_MEAN_WIDTH) * (1.0 - oscillating)


def _bounce_score(m: MotionSequence, mode: str) -> float:
    hopping = _logistic(spectral_peak(m.frames[:, Channel.BOUNCE], m.frame_rate), HOP_PEAK_THRESHOLD, HOP_PEAK_WIDTH)
    return hopping if mode == "hop" else 1.0 - hopping


def concept_classifier(m: MotionSequence, token: ConceptToken) -> float:
    """Score in [0, 1] that `token` is present in `m`; >= PRESENT_THRESHOLD means present."""
    if token.family == ConceptFamily.direction:
        return _direction_score(m, token.mode)
    if token.family == ConceptFamily.left_limb:
        return _limb_score(m.frames[:, Channel.LEFT_LIMB], token.mode)
    if token.family == ConceptFamily.right_limb:
        return _limb_score(m.frames[:, Channel.RIGHT_LIMB], token.mode)
    return _bounce_score(m, token.mode)


def description_scores(m: MotionSequence, desc: ConceptDescription) -> Dict[str, float]:
    return {token.to_text(): concept_classifier(m, token) for token in desc.tokens}


def description_present(m: MotionSequence, desc: ConceptDescription) -> bool:
    """True iff every token of the description is detected (vacuously true for empty descriptions)."""
    return all(score >= PRESENT_THRESHOLD for score in description_scores(m, desc).values())
