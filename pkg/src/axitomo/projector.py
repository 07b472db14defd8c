"""Sparse imaging matrix of ray/annular-cylinder intersection lengths.

Rows are detector rays, columns are annular voxels (see
:class:`~axitomo.geometry.RadialGrid` for the column map).  Only the
quadrant ``s >= 0, t >= 0`` of the detector is traced; the other three
quadrants follow from the y- and z-mirror symmetries of the setup.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .geometry import (
    ConeBeamGeometry,
    RadialGrid,
    Ray,
    cylinder_hits,
    hit_heights,
    min_annulus_index,
    ray_from_detector,
)

# below this |sin(gamma)| a segment is treated as horizontal
SIN_GAMMA_EPS = 1e-12


class RowAccumulator:
    """Column -> accumulated length map for a single ray."""

    def __init__(self):
        self.values: Dict[int, float] = {}

    def add(self, col: int, length: float) -> None:
        self.values[col] = self.values.get(col, 0.0) + length

    def __len__(self):
        return len(self.values)

    def dense(self, n_cols: int) -> np.ndarray:
        out = np.zeros(n_cols)
        for c, v in self.values.items():
            out[c] += v
        return out

    def finalize(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sorted column indices and values, zero entries dropped."""
        items = sorted((c, v) for c, v in self.values.items() if v != 0.0)
        cols = np.fromiter((c for c, _ in items), dtype=np.int64, count=len(items))
        vals = np.fromiter((v for _, v in items), dtype=np.float64, count=len(items))
        return cols, vals


@dataclass
class SystemMatrix:
    """CSR storage of the imaging matrix."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n_cols: int
    _csr: Optional[sp.csr_matrix] = field(default=None, repr=False, compare=False)

    @property
    def n_rows(self) -> int:
        return len(self.indptr) - 1

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def row(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[k], self.indptr[k + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def tocsr(self) -> sp.csr_matrix:
        if self._csr is None:
            self._csr = sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)
        return self._csr

    def toarray(self) -> np.ndarray:
        return self.tocsr().toarray()

    @classmethod
    def from_rows(cls, rows: Sequence[Tuple[np.ndarray, np.ndarray]], n_cols: int) -> "SystemMatrix":
        counts = np.array([len(c) for c, _ in rows], dtype=np.int64)
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        if rows:
            indices = np.concatenate([c for c, _ in rows]).astype(np.int64)
            data = np.concatenate([v for _, v in rows]).astype(np.float64)
        else:
            indices = np.zeros(0, dtype=np.int64)
            data = np.zeros(0)
        return cls(indptr, indices, data, int(n_cols))

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SystemMatrix":
        csr = sp.csr_matrix(np.asarray(dense, dtype=np.float64))
        csr.sort_indices()
        return cls(csr.indptr.astype(np.int64), csr.indices.astype(np.int64), csr.data.copy(), csr.shape[1])

    def same_values(self, other: "SystemMatrix") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )


def accumulate_segment(acc: RowAccumulator, grid: RadialGrid, annulus_i: int,
                       h1: float, h2: float, gamma: float, t1: float, t2: float) -> None:
    """Spread one single-annulus ray segment over the z-slabs it crosses.

    ``h1, h2`` are the heights of the segment ends and ``t1, t2`` their ray
    parameters.  Length outside ``|z| < Z0`` is dropped.
    """
    sg = abs(math.sin(gamma))
    dz, n, z0 = grid.dz, grid.n, grid.Z0
    if sg < SIN_GAMMA_EPS:
        j = math.floor(0.5 * (h1 + h2) / dz)
        if -n <= j < n:
            acc.add(grid.column(annulus_i, j), abs(t2 - t1))
        return
    if h1 > h2:
        h1, h2 = h2, h1
    h1 = max(h1, -z0)
    h2 = min(h2, z0)
    if h1 >= h2:
        return
    jp = math.floor(h1 / dz)
    jq = math.floor(h2 / dz)
    if jp == jq:
        _add_slab(acc, grid, annulus_i, jp, abs(h2 - h1) / sg)
        return
    _add_slab(acc, grid, annulus_i, jp, abs((jp + 1) * dz - h1) / sg)
    _add_slab(acc, grid, annulus_i, jq, abs(h2 - jq * dz) / sg)
    inner = dz / sg
    for j in range(jp + 1, jq):
        _add_slab(acc, grid, annulus_i, j, inner)


def _add_slab(acc, grid, i, j, length):
    if length > 0.0 and -grid.n <= j < grid.n:
        acc.add(grid.column(i, j), length)


def build_row(geom: ConeBeamGeometry, grid: RadialGrid, ray: Ray) -> RowAccumulator:
    """Intersection lengths of one ray with every annular voxel."""
    acc = RowAccumulator()
    n_alpha = min_annulus_index(grid, geom, ray)
    if n_alpha is None:
        return acc
    hits = {}
    for i in range(n_alpha, grid.m + 1):
        h = cylinder_hits(geom, ray, i * grid.dr)
        if h is None:
            # rounding put the innermost radius on the tangent; skip it
            if i == n_alpha:
                continue
            raise FloatingPointError(f"ray {ray} misses radius {i * grid.dr} but hits a smaller one")
        hits[i] = h
    if not hits:
        return acc
    n_alpha = min(hits)
    heights = {i: hit_heights(ray, h) for i, h in hits.items()}
    g = ray.gamma
    for i in range(n_alpha, grid.m):
        (ti0, ti1), (to0, to1) = hits[i], hits[i + 1]
        (hi0, hi1), (ho0, ho1) = heights[i], heights[i + 1]
        # entering side, then exiting side; both lie in annulus i+1
        accumulate_segment(acc, grid, i + 1, ho0, hi0, g, to0, ti0)
        accumulate_segment(acc, grid, i + 1, hi1, ho1, g, ti1, to1)
    (t0, t1), (h0, h1) = hits[n_alpha], heights[n_alpha]
    accumulate_segment(acc, grid, n_alpha, h0, h1, g, t0, t1)
    return acc


def worker_count(requested: Optional[int] = None) -> int:
    """Requested worker count (default: CPU count), capped by ``AXITOMO_THREADS``."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    env = os.environ.get("AXITOMO_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"AXITOMO_THREADS must be an integer, got {env!r}") from None
        n = min(n, cap)
    return max(1, n)


def _trace_cells(geom, grid, cells):
    out = []
    for s, t in cells:
        out.append(build_row(geom, grid, ray_from_detector(geom, s, t)).finalize())
    return out


def _trace(geom: ConeBeamGeometry, grid: RadialGrid, cells: List[Tuple[int, int]],
           workers: Optional[int]) -> List[Tuple[np.ndarray, np.ndarray]]:
    workers = worker_count(workers)
    if workers == 1 or len(cells) < 256:
        return _trace_cells(geom, grid, cells)
    # contiguous chunks, results concatenated in submission order
    n_chunks = workers * 4
    size = -(-len(cells) // n_chunks)
    chunks = [cells[k:k + size] for k in range(0, len(cells), size)]
    rows = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for part in ex.map(_trace_cells, [geom] * len(chunks), [grid] * len(chunks), chunks):
            rows.extend(part)
    return rows


def quadrant_cells(geom: ConeBeamGeometry) -> List[Tuple[int, int]]:
    """Detector cells of the ``s, t >= 0`` quadrant in row order ``t * p + s``."""
    return [(s, t) for t in range(geom.q) for s in range(geom.p)]


def detector_cells(geom: ConeBeamGeometry) -> List[Tuple[int, int]]:
    """All detector cells in row order ``(t + q) * 2p + (s + p)``."""
    return [(s, t) for t in range(-geom.q, geom.q) for s in range(-geom.p, geom.p)]


def row_index(geom: ConeBeamGeometry, s: int, t: int) -> int:
    return (t + geom.q) * 2 * geom.p + (s + geom.p)


def build_quadrant(geom: ConeBeamGeometry, grid: RadialGrid, workers: Optional[int] = None) -> SystemMatrix:
    rows = _trace(geom, grid, quadrant_cells(geom), workers)
    return SystemMatrix.from_rows(rows, grid.n_cols)


def build_direct(geom: ConeBeamGeometry, grid: RadialGrid, workers: Optional[int] = None) -> SystemMatrix:
    """Trace every detector ray without using symmetry (debug path)."""
    rows = _trace(geom, grid, detector_cells(geom), workers)
    return SystemMatrix.from_rows(rows, grid.n_cols)


def _z_mirror(cols: np.ndarray, vals: np.ndarray, grid: RadialGrid):
    i0 = cols % grid.m
    j = cols // grid.m - grid.n
    mirrored = (grid.n - 1 - j) * grid.m + i0
    order = np.argsort(mirrored, kind="stable")
    return mirrored[order], vals[order]


def expand_by_symmetry(quadrant: SystemMatrix, grid: RadialGrid, geom: ConeBeamGeometry) -> SystemMatrix:
    """Full ``4pq``-row matrix from the ``s, t >= 0`` quadrant."""
    p, q = geom.p, geom.q
    if quadrant.shape != (p * q, grid.n_cols):
        raise ValueError(f"quadrant shape {quadrant.shape} does not match ({p * q}, {grid.n_cols})")
    rows: List[Tuple[np.ndarray, np.ndarray]] = [None] * (4 * p * q)  # type: ignore[list-item]
    for t in range(q):
        for s in range(p):
            cols, vals = quadrant.row(t * p + s)
            mcols, mvals = _z_mirror(cols, vals, grid)
            rows[row_index(geom, s, t)] = (cols, vals)
            rows[row_index(geom, -1 - s, t)] = (cols, vals)
            rows[row_index(geom, s, -1 - t)] = (mcols, mvals)
            rows[row_index(geom, -1 - s, -1 - t)] = (mcols, mvals)
    return SystemMatrix.from_rows(rows, grid.n_cols)


def build_system_matrix(geom: ConeBeamGeometry, grid: RadialGrid, symmetry: bool = True,
                        workers: Optional[int] = None) -> SystemMatrix:
    if symmetry:
        return expand_by_symmetry(build_quadrant(geom, grid, workers), grid, geom)
    return build_direct(geom, grid, workers)


def matvec(A: SystemMatrix, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.size != A.n_cols:
        raise ValueError(f"volume has {u.size} entries, matrix has {A.n_cols} columns")
    return A.tocsr() @ u


def symmetric_matvec(A: SystemMatrix, u: np.ndarray, m: int) -> np.ndarray:
    """Forward projection whose rounding respects the z-mirror.

    Products in columns ``(i, j)`` and ``(i, -1-j)`` are added first, then
    the pair sums are accumulated in a fixed folded-column order.  Because
    IEEE addition is commutative, a z-symmetric volume then gives exactly
    equal values on mirrored detector rows, which the CSR product does not
    guarantee.  Agrees with :func:`matvec` up to rounding.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.size != A.n_cols or A.n_cols % (2 * m):
        raise ValueError(f"volume has {u.size} entries, matrix has {A.n_cols} columns (m={m})")
    n = A.n_cols // (2 * m)
    rows = np.repeat(np.arange(A.n_rows, dtype=np.int64), np.diff(A.indptr))
    prod = A.data * u[A.indices]
    slab = A.indices // m - n
    key = np.where(slab >= 0, slab, -1 - slab) * m + A.indices % m
    group, inv = np.unique(rows * (m * n) + key, return_inverse=True)
    # bincount adds sequentially from zero: each group holds at most two terms
    pair = np.bincount(inv.ravel(), weights=prod, minlength=group.size)
    return np.bincount(group // (m * n), weights=pair, minlength=A.n_rows)


def rmatvec(A: SystemMatrix, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.size != A.n_rows:
        raise ValueError(f"data has {w.size} entries, matrix has {A.n_rows} rows")
    return A.tocsr().T @ w


def operator_norm(A: SystemMatrix, iters: int = 100, seed: int = 0, tol: float = 0.0) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    x = np.random.default_rng(seed).standard_normal(A.n_cols)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = rmatvec(A, matvec(A, x))
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        prev, lam = lam, nrm
        x = y / nrm
        if tol > 0 and abs(lam - prev) <= tol * lam:
            break
    return math.sqrt(lam)
