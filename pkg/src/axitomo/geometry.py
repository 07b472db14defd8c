"""Cone-beam ray parametrization and ray/cylinder intersections.

The source sits at ``(source_x, 0, 0)`` and the flat detector occupies the
plane ``x = detector_x``.  A ray is described by two angles: ``gamma``, its
elevation above the OXY plane, and ``alpha``, the azimuth of its OXY
projection measured from the x-axis.  Points on the ray are::

    x(t) = source_x + t cos(gamma) cos(alpha)
    y(t) =            t cos(gamma) sin(alpha)
    z(t) =            t sin(gamma)

so ``t`` is arc length from the source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple


@dataclass(frozen=True)
class ConeBeamGeometry:
    """Source/detector layout with ``2p x 2q`` detector cells."""

    source_x: float
    detector_x: float
    pitch_y: float
    pitch_z: float
    p: int
    q: int

    def __post_init__(self):
        if self.source_x == self.detector_x:
            raise ValueError("source and detector planes coincide")
        if self.pitch_y <= 0 or self.pitch_z <= 0:
            raise ValueError("detector pitches must be positive")
        if int(self.p) != self.p or int(self.q) != self.q or self.p < 1 or self.q < 1:
            raise ValueError("p and q must be positive integers")

    @property
    def n_rays(self) -> int:
        return 4 * self.p * self.q

    def check_encloses(self, grid: "RadialGrid") -> None:
        """Raise unless source and detector lie on opposite sides of the object."""
        r0 = grid.R0
        if not (self.source_x > r0 and self.detector_x < -r0):
            raise ValueError(
                f"expected source_x > R0 and detector_x < -R0 (R0={r0}), "
                f"got source_x={self.source_x}, detector_x={self.detector_x}"
            )

    def to_dict(self) -> dict:
        return {
            "source_x": self.source_x,
            "detector_x": self.detector_x,
            "pitch_y": self.pitch_y,
            "pitch_z": self.pitch_z,
            "p": self.p,
            "q": self.q,
        }


@dataclass(frozen=True)
class RadialGrid:
    """Annular-cylinder discretization of ``rho < R0, |z| < Z0``.

    Annulus ``(i, j)`` with ``i in 1..m`` and ``j in -n..n-1`` covers
    ``(i-1) dr <= rho < i dr`` and ``j dz <= z < (j+1) dz``.  Its linear
    column index is ``(j + n) * m + (i - 1)``.
    """

    m: int
    n: int
    dr: float
    dz: float

    def __post_init__(self):
        if self.dr <= 0 or self.dz <= 0:
            raise ValueError("dr and dz must be positive")
        if int(self.m) != self.m or int(self.n) != self.n or self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive integers")

    @property
    def R0(self) -> float:
        return self.m * self.dr

    @property
    def Z0(self) -> float:
        return self.n * self.dz

    @property
    def n_cols(self) -> int:
        return 2 * self.m * self.n

    @property
    def shape(self) -> Tuple[int, int]:
        """Shape of the ``(radial, axial)`` image of the unknown."""
        return (self.m, 2 * self.n)

    def column(self, i: int, j: int) -> int:
        return (j + self.n) * self.m + (i - 1)

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "dr": self.dr, "dz": self.dz}


@dataclass(frozen=True)
class Ray:
    gamma: float
    alpha: float

    def __post_init__(self):
        if not abs(self.gamma) < math.pi / 2:
            raise ValueError("ray elevation must satisfy |gamma| < pi/2")

    def point(self, source_x: float, t: float) -> Tuple[float, float, float]:
        cg = math.cos(self.gamma)
        return (
            source_x + t * cg * math.cos(self.alpha),
            t * cg * math.sin(self.alpha),
            t * math.sin(self.gamma),
        )


def detector_cell_center(geom: ConeBeamGeometry, s: int, t: int) -> Tuple[float, float, float]:
    if not (-geom.p <= s < geom.p and -geom.q <= t < geom.q):
        raise IndexError(f"detector cell ({s}, {t}) outside [-{geom.p}, {geom.p}) x [-{geom.q}, {geom.q})")
    return (geom.detector_x, (s + 0.5) * geom.pitch_y, (t + 0.5) * geom.pitch_z)


def ray_from_detector(geom: ConeBeamGeometry, s: int, t: int) -> Ray:
    """Ray from the source through the center of detector cell ``(s, t)``."""
    x, y, z = detector_cell_center(geom, s, t)
    dx = x - geom.source_x
    gamma = math.atan2(z, math.hypot(dx, y))
    alpha = math.atan2(y, dx)
    return Ray(gamma=gamma, alpha=alpha)


def planar_min_radius(geom: ConeBeamGeometry, ray: Ray) -> float:
    """Closest approach of the ray's OXY projection to the z-axis."""
    return abs(geom.source_x * math.sin(ray.alpha))


def min_annulus_index(grid: RadialGrid, geom: ConeBeamGeometry, ray: Ray) -> Optional[int]:
    """Innermost annulus reached by the ray, or ``None`` if it misses the grid.

    This is the smallest ``i`` with ``i * dr > planar_min_radius``; a ray
    exactly tangent to a cylinder does not enter it.
    """
    d = planar_min_radius(geom, ray)
    i = int(math.floor(d / grid.dr)) + 1
    # floor(d/dr) can be off by one when d/dr rounds across an integer
    while i > 1 and (i - 1) * grid.dr > d:
        i -= 1
    while i * grid.dr <= d:
        i += 1
    if i > grid.m:
        return None
    return i


def cylinder_hits(geom: ConeBeamGeometry, ray: Ray, rho: float) -> Optional[Tuple[float, float]]:
    """Ray parameters ``(t0, t1)``, ``t0 < t1``, where the ray crosses radius ``rho``.

    Returns ``None`` for a miss or an exact tangency.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    x0 = geom.source_x
    ca = math.cos(ray.alpha)
    sa = math.sin(ray.alpha)
    # planar parameter s = t cos(gamma): s^2 + 2 b s + c = 0
    b = x0 * ca
    c = x0 * x0 - rho * rho
    disc = rho * rho - (x0 * sa) ** 2
    if disc <= 0.0:
        return None
    root = math.sqrt(disc)
    # larger-magnitude root first, the other from the product of roots
    big = -b - math.copysign(root, b)
    s0, s1 = big, c / big
    if s0 > s1:
        s0, s1 = s1, s0
    cg = math.cos(ray.gamma)
    return (s0 / cg, s1 / cg)


def hit_heights(ray: Ray, t_pair: Tuple[float, float]) -> Tuple[float, float]:
    sg = math.sin(ray.gamma)
    return (t_pair[0] * sg, t_pair[1] * sg)
