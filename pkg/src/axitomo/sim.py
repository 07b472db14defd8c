"""Phantoms, synthetic projections and error metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .geometry import ConeBeamGeometry, RadialGrid
from .projector import SystemMatrix, matvec, symmetric_matvec

_TOL = 1e-12


@dataclass(frozen=True)
class Piece:
    """Constant-valued annular cylinder ``r_in <= rho < r_out, z_min <= z < z_max``."""

    r_in: float
    r_out: float
    z_min: float
    z_max: float
    value: float

    def __post_init__(self):
        if not (0.0 <= self.r_in < self.r_out):
            raise ValueError(f"need 0 <= r_in < r_out, got {self.r_in}, {self.r_out}")
        if not self.z_min < self.z_max:
            raise ValueError(f"need z_min < z_max, got {self.z_min}, {self.z_max}")


@dataclass
class PhantomSpec:
    """Ordered list of pieces; later pieces overwrite earlier ones."""

    pieces: List[Piece] = field(default_factory=list)

    @classmethod
    def from_list(cls, items: Sequence[dict]) -> "PhantomSpec":
        return cls([Piece(**item) for item in items])

    def to_list(self) -> List[dict]:
        return [vars(p).copy() for p in self.pieces]


def default_phantom() -> PhantomSpec:
    """Shell of value 1 (``0.6 <= r < 1``, ``|z| <= 1``) around a core of 0.5
    (``r < 0.3``, ``|z| <= 0.8``), empty in between."""
    return PhantomSpec([
        Piece(0.6, 1.0, -1.0, 1.0, 1.0),
        Piece(0.0, 0.3, -0.8, 0.8, 0.5),
    ])


def uniform_cylinder(grid: RadialGrid, value: float = 1.0) -> PhantomSpec:
    return PhantomSpec([Piece(0.0, grid.R0, -grid.Z0, grid.Z0, value)])


def rasterize(phantom: PhantomSpec, grid: RadialGrid) -> np.ndarray:
    """Sample the phantom at annulus centers into an ``(m, 2n)`` volume."""
    R0, Z0 = grid.R0, grid.Z0
    u = np.zeros(grid.shape)
    rc = (np.arange(1, grid.m + 1) - 0.5) * grid.dr
    zc = (np.arange(-grid.n, grid.n) + 0.5) * grid.dz
    rr, zz = np.meshgrid(rc, zc, indexing="ij")
    for piece in phantom.pieces:
        if piece.r_out > R0 * (1 + _TOL) or piece.z_min < -Z0 * (1 + _TOL) or piece.z_max > Z0 * (1 + _TOL):
            raise ValueError(f"piece {piece} extends outside the grid cylinder (R0={R0}, Z0={Z0})")
        mask = (rr >= piece.r_in) & (rr < piece.r_out) & (zz >= piece.z_min) & (zz < piece.z_max)
        u[mask] = piece.value
    return u


def volume_to_vector(u: np.ndarray) -> np.ndarray:
    """Column-ordered vector of an ``(m, 2n)`` volume."""
    return np.asarray(u).ravel(order="F")


def vector_to_volume(x: np.ndarray, grid: RadialGrid) -> np.ndarray:
    return np.asarray(x).reshape(grid.shape, order="F")


def data_to_image(g: np.ndarray, geom: ConeBeamGeometry) -> np.ndarray:
    """Detector image indexed ``[s + p, t + q]``."""
    return np.asarray(g).reshape((2 * geom.p, 2 * geom.q), order="F")


def image_to_data(img: np.ndarray) -> np.ndarray:
    return np.asarray(img).ravel(order="F")


def simulate(A: SystemMatrix, volume: np.ndarray, noise_variance: float, seed: int = 0) -> np.ndarray:
    """Forward projection plus i.i.d. zero-mean Gaussian noise of the given variance.

    A 2D ``(m, 2n)`` volume is projected with :func:`symmetric_matvec` so
    z-symmetric phantoms give exactly z-symmetric data; a flat vector goes
    through the plain product.
    """
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    if np.ndim(volume) == 2:
        g = symmetric_matvec(A, volume_to_vector(volume), np.shape(volume)[0])
    else:
        g = matvec(A, volume)
    if noise_variance > 0:
        rng = np.random.default_rng(seed)
        g = g + rng.normal(0.0, np.sqrt(noise_variance), size=g.shape)
    return g


def rmse(u: np.ndarray, u_star: np.ndarray) -> float:
    """Root of the mean squared voxel difference."""
    u = np.asarray(u, dtype=np.float64)
    u_star = np.asarray(u_star, dtype=np.float64)
    if u.shape != u_star.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {u_star.shape}")
    d = np.abs(u - u_star)
    scale = d.max(initial=0.0)
    if scale == 0.0:
        return 0.0
    # scaled so tiny differences do not underflow to zero when squared
    return float(scale * np.sqrt(np.mean((d / scale) ** 2)))
