"""Display rasters and profiles of reconstructed volumes."""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np

from .geometry import RadialGrid


def central_section(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Longitudinal section through the axis, shape ``(2n, 2m)``.

    Top row is the highest slab; the radial profile is mirrored about the
    axis so column ``m`` is the innermost annulus on the right half.
    """
    u = np.asarray(u).reshape(grid.shape)
    half = u.T[::-1, :]
    return np.concatenate([half[:, ::-1], half], axis=1)


def row_section(u: np.ndarray, grid: RadialGrid, j: int) -> np.ndarray:
    """Horizontal ``2m x 2m`` slice at slab ``j``, the radial profile rotated
    about the axis.  Pixels outside ``R0`` are zero."""
    if not -grid.n <= j < grid.n:
        raise IndexError(f"slab {j} outside [-{grid.n}, {grid.n})")
    u = np.asarray(u).reshape(grid.shape)
    prof = u[:, j + grid.n]
    m = grid.m
    c = (np.arange(2 * m) - m + 0.5) * grid.dr
    x, y = np.meshgrid(c, -c)
    rho = np.hypot(x, y)
    idx = np.floor(rho / grid.dr).astype(int)
    out = np.zeros((2 * m, 2 * m))
    inside = idx < m
    out[inside] = prof[idx[inside]]
    return out


def slab_of_height(grid: RadialGrid, z: float) -> int:
    j = math.floor(z / grid.dz)
    if not -grid.n <= j < grid.n:
        raise ValueError(f"height {z} outside [-{grid.Z0}, {grid.Z0})")
    return j


def profile(u: np.ndarray, grid: RadialGrid, z: float) -> Tuple[np.ndarray, np.ndarray]:
    """Radii of annulus centers and the values of the slab containing ``z``."""
    j = slab_of_height(grid, z)
    u = np.asarray(u).reshape(grid.shape)
    r = (np.arange(1, grid.m + 1) - 0.5) * grid.dr
    return r, u[:, j + grid.n].copy()


def to_uint16(img: np.ndarray, window: Sequence[float]) -> np.ndarray:
    """Map ``[lo, hi]`` linearly onto ``0..65535``, clipping outside values."""
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError(f"display window must satisfy lo < hi, got {window}")
    scaled = (np.asarray(img, dtype=np.float64) - lo) / (hi - lo)
    return np.rint(np.clip(scaled, 0.0, 1.0) * 65535).astype(np.uint16)
