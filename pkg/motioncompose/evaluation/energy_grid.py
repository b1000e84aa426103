# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

"""Energy-surface slices for contour rendering.

The energy itself has an intractable normalizer, so the squared norm of the predicted noise stands in for it: the score
is proportional to the negative energy gradient, and ‖ε̂‖² is large exactly where the model pushes hardest.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.ndimage import gaussian_filter
from scipy.stats import pearsonr
from tqdm import tqdm

from motioncompose.utils.errors import InvalidInputError, ShapeError


DEFAULT_RESOLUTION: Tuple[int, int] = (41, 41)
DEFAULT_EXTENT: float = 3.0
DEFAULT_SMOOTHING: float = 1.0
CSV_FLOAT_FORMAT: str = "%.17g"


@dataclass
class Plane:
    """A 2-D affine slice anchor + x·u + y·v through the score function's input space."""
    anchor: np.ndarray
    u: np.ndarray
    v: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        self.anchor = np.asarray(self.anchor, dtype=np.float64)
        self.u = np.asarray(self.u, dtype=np.float64).reshape(self.anchor.shape)
        self.v = np.asarray(self.v, dtype=np.float64).reshape(self.anchor.shape)

    def point(self, x: float, y: float) -> np.ndarray:
        return self.anchor + x * self.u + y * self.v


def coordinate_plane(anchor: np.ndarray, index_x: Tuple[int, ...], index_y: Tuple[int, ...]) -> Plane:
    """Slice along two coordinates of the anchor (multi-indices such as (token, channel))."""
    anchor = np.asarray(anchor, dtype=np.float64)
    if tuple(index_x) == tuple(index_y):
        raise InvalidInputError(f"Plane needs two distinct coordinates but got {index_x} twice")
    u = np.zeros_like(anchor)
    v = np.zeros_like(anchor)
    u[tuple(index_x)] = 1.0
    v[tuple(index_y)] = 1.0
    return Plane(anchor, u, v, label=f"coords {tuple(index_x)} x {tuple(index_y)}")


def pca_plane(anchor: np.ndarray, points: Sequence[np.ndarray]) -> Plane:
    """Slice along the top two principal directions of `points` (e.g. latents visited during sampling)."""
    anchor = np.asarray(anchor, dtype=np.float64)
    flat = np.stack([np.asarray(p, dtype=np.float64).reshape(-1) for p in points])
    if flat.shape[0] < 3 or flat.shape[1] != anchor.size:
        raise ShapeError(f"PCA needs at least 3 points of size {anchor.size} but got {flat.shape}")
    centered = flat - flat.mean(axis=0)
    _, singular_values, vt = np.linalg.svd(centered, full_matrices=False)
    if singular_values[1] <= 0:
        raise InvalidInputError("Points span fewer than two directions")
    # Sign convention: the largest-magnitude entry of each direction is positive.
    directions = [d * np.sign(d[np.argmax(np.abs(d))]) for d in vt[:2]]
    return Plane(anchor, directions[0], directions[1], label="pca")


@dataclass
class EnergyGrid:
    values: np.ndarray  # rows follow y_values, columns follow x_values
    x_values: np.ndarray
    y_values: np.ndarray
    label: str = ""
    metadata: dict = field(default_factory=lambda: {})

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.x_values = np.asarray(self.x_values, dtype=np.float64)
        self.y_values = np.asarray(self.y_values, dtype=np.float64)
        if self.values.ndim != 2 or min(self.values.shape) < 2:
            raise ShapeError(f"Energy grid should be at least 2x2 but has shape {self.values.shape}")
        if self.values.shape != (len(self.y_values), len(self.x_values)):
            raise ShapeError(
                f"Grid shape {self.values.shape} does not match axes ({len(self.y_values)}, {len(self.x_values)})"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("Energy grid contains non-finite values")


def energy_proxy(score_fn: Callable[[np.ndarray, int], np.ndarray], z: np.ndarray, t: int) -> float:
    eps = np.asarray(score_fn(z, t), dtype=np.float64)
    return float(np.sum(eps * eps))


def energy_grid(
    score_fn: Callable[[np.ndarray, int], np.ndarray], plane: Plane, t: int,
    resolution: Tuple[int, int] = DEFAULT_RESOLUTION, extent: float = DEFAULT_EXTENT,
    smoothing: float = DEFAULT_SMOOTHING, num_parallel: int = 4, show_progress: bool = False,
) -> EnergyGrid:
    """Evaluate ‖ε̂(z, t)‖² on a rows × cols lattice over [−extent, extent]² in plane coordinates.

    Rows are evaluated in parallel; every cell is a pure function of its coordinates, so the grid does not depend on
    the worker count. `smoothing` is the Gaussian kernel width in cells (0 disables it).
    """
    rows, cols = resolution
    if rows < 2 or cols < 2:
        raise InvalidInputError(f"Resolution should be at least 2x2 but {resolution} was given")
    if smoothing < 0:
        raise InvalidInputError(f"Smoothing width should be non-negative but {smoothing} was given")

    x_values = np.linspace(-extent, extent, cols)
    y_values = np.linspace(-extent, extent, rows)

    def evaluate_row(row: int) -> np.ndarray:
        return np.array([energy_proxy(score_fn, plane.point(x, y_values[row]), t) for x in x_values])

    with ThreadPoolExecutor(max_workers=max(1, num_parallel)) as executor:
        values = np.stack(list(tqdm(
            executor.map(evaluate_row, range(rows)), total=rows, desc="Energy grid", disable=not show_progress,
        )))

    if smoothing > 0:
        values = gaussian_filter(values, sigma=smoothing, mode="nearest")

    return EnergyGrid(
        values, x_values, y_values, label=plane.label,
        metadata={"t": int(t), "extent": float(extent), "smoothing": float(smoothing)},
    )


def grid_correlation(a: EnergyGrid, b: EnergyGrid) -> float:
    """Pearson correlation between two grids over the same lattice."""
    if a.values.shape != b.values.shape:
        raise ShapeError(f"Grids differ in shape: {a.values.shape} vs {b.values.shape}")
    if np.ptp(a.values) == 0 or np.ptp(b.values) == 0:
        raise InvalidInputError("Correlation is undefined for a constant grid")
    return float(pearsonr(a.values.reshape(-1), b.values.reshape(-1))[0])


def save_grid_csv(grid: EnergyGrid, path: str) -> None:
    """Header row holds the x-axis values, the first column the y-axis values."""
    df = pd.DataFrame(grid.values, index=grid.y_values, columns=[repr(float(x)) for x in grid.x_values])
    df.index.name = "y\\x"
    df.to_csv(path, float_format=CSV_FLOAT_FORMAT)
    return


def load_grid_csv(path: str, label: str = "") -> EnergyGrid:
    df = pd.read_csv(path, index_col=0, float_precision="round_trip")
    return EnergyGrid(
        values=df.to_numpy(dtype=np.float64),
        x_values=np.array([float(x) for x in df.columns]),
        y_values=df.index.to_numpy(dtype=np.float64),
        label=label,
    )
