# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import os
from typing import List, Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from motioncompose.evaluation.energy_grid import EnergyGrid
from motioncompose.toymotion.common import CHANNEL_NAMES, Channel, MotionSequence


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_motion(motions: List[MotionSequence], path: str, labels: Optional[List[str]] = None, title: str = "") -> str:
    """x-y path on the left, one trace per channel on the right."""
    labels = labels if labels is not None else [m.metadata.get("description", f"#{i}") for i, m in enumerate(motions)]
    fig = plt.figure(figsize=(12, 6))
    grid = fig.add_gridspec(len(CHANNEL_NAMES), 2, width_ratios=[1, 1.4])

    ax_path = fig.add_subplot(grid[:, 0])
    for m, label in zip(motions, labels):
        ax_path.plot(m.frames[:, Channel.X], m.frames[:, Channel.Y], linewidth=1.2, label=label)
        ax_path.scatter(m.frames[0, Channel.X], m.frames[0, Channel.Y], s=12, marker="o")
    ax_path.set_xlabel("x")
    ax_path.set_ylabel("y")
    ax_path.set_aspect("equal", adjustable="datalim")
    ax_path.set_title(title or "path")
    if len(motions) <= 8:
        ax_path.legend(fontsize=7, loc="best")

    for channel, name in enumerate(CHANNEL_NAMES):
        ax = fig.add_subplot(grid[channel, 1])
        for m in motions:
            time = np.arange(m.length) / m.frame_rate
            ax.plot(time, m.frames[:, channel], linewidth=0.9)
        ax.set_ylabel(name, fontsize=8)
        ax.tick_params(labelsize=7)
        if channel < len(CHANNEL_NAMES) - 1:
            ax.set_xticklabels([])
    fig.axes[-1].set_xlabel("time (s)")
    fig.tight_layout()
    return _save(fig, path)


def plot_energy_grid(grid: EnergyGrid, path: str, levels: int = 20, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(6, 5))
    xx, yy = np.meshgrid(grid.x_values, grid.y_values)
    contour = ax.contourf(xx, yy, grid.values, levels=levels, cmap="viridis")
    ax.contour(xx, yy, grid.values, levels=levels, colors="white", linewidths=0.3)
    fig.colorbar(contour, ax=ax, label="‖ε̂‖²")
    ax.set_title(title or grid.label)
    ax.set_xlabel("u")
    ax.set_ylabel("v")
    fig.tight_layout()
    return _save(fig, path)
