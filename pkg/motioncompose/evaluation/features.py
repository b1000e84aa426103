# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

"""Handcrafted motion features replacing a learned motion encoder.

Bump FEATURE_VERSION whenever the list or a formula changes: metric values are only comparable within one version.
"""

from typing import List

import numpy as np

from motioncompose.toymotion.common import ANGLE_CHANNELS, CHANNEL_NAMES, MOTION_DIM, MotionSequence


FEATURE_VERSION: int = 1
STATISTICS: List[str] = ["mean", "variance", "mean_speed", "dominant_frequency", "oscillation_amplitude"]
FEATURE_NAMES: List[str] = [f"{channel}.{stat}" for channel in CHANNEL_NAMES for stat in STATISTICS]
FEATURE_DIM: int = len(FEATURE_NAMES)
FLAT_SPECTRUM: float = 1e-9


def _detrend(signal: np.ndarray) -> np.ndarray:
    time = np.arange(len(signal), dtype=np.float64)
    slope, intercept = np.polyfit(time, signal, 1)
    return signal - (slope * time + intercept)


def _channel_statistics(signal: np.ndarray, frame_rate: float) -> List[float]:
    residual = _detrend(signal)
    spectrum = np.abs(np.fft.rfft(residual))
    freqs = np.fft.rfftfreq(len(signal), d=1.0 / frame_rate)
    peak = int(np.argmax(spectrum[1:])) + 1 if len(spectrum) > 1 else 0
    dominant = float(freqs[peak]) if spectrum[peak] > FLAT_SPECTRUM * len(signal) else 0.0
    return [
        float(signal.mean()),
        float(signal.var()),
        float(np.mean(np.abs(np.diff(signal))) * frame_rate),
        dominant,
        float(residual.std()),
    ]


def motion_features(m: MotionSequence) -> np.ndarray:
    frames = m.frames.astype(np.float64)
    features = []
    for channel in range(MOTION_DIM):
        signal = frames[:, channel]
        if channel in ANGLE_CHANNELS:
            signal = np.unwrap(signal)
        features.extend(_channel_statistics(signal, m.frame_rate))
    return np.array(features)


def feature_matrix(motions: List[MotionSequence]) -> np.ndarray:
    if len(motions) == 0:
        return np.zeros((0, FEATURE_DIM))
    return np.stack([motion_features(m) for m in motions])
