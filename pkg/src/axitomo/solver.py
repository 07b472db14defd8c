"""Reconstruction engines.

Volumes are handled as ``(m, 2n)`` images (radial index first); the
imaging matrix acts on their column-major flattening, which matches the
column map ``(j + n) * m + (i - 1)``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import frame
from .frame import FilterBank
from .projector import SystemMatrix, matvec, operator_norm, rmatvec

logger = logging.getLogger(__name__)


@dataclass
class SolverParams:
    """Parameters of the adaptive-tight-frame reconstruction.

    ``tau`` and ``sigma`` default to ``1 / ||A||`` when left as ``None``.
    The hard-threshold level used in the outer loop is ``gamma1 / sqrt(lam)``.
    """

    lam: float = 10.0
    gamma1: float = 0.063
    tau: Optional[float] = None
    sigma: Optional[float] = None
    theta: float = 1.0
    n1: int = 1000
    n2: int = 3
    eps: float = 1e-4
    r: int = 7
    n_alt: int = 20
    lambda_tv: float = 0.3
    tv_iter: int = 1000
    power_iters: int = 200

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.gamma1 <= 0:
            raise ValueError("gamma1 must be positive")
        if self.lambda_tv <= 0:
            raise ValueError("lambda_tv must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        for name in ("n1", "n2", "n_alt", "tv_iter", "power_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("tau", "sigma"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValueError(f"{name} must be positive")
        if self.r < 1 or self.r % 2 == 0:
            raise ValueError("r must be odd and positive")

    @property
    def threshold(self) -> float:
        return self.gamma1 / math.sqrt(self.lam)

    def steps(self, L: float) -> Tuple[float, float]:
        tau = self.tau if self.tau is not None else 1.0 / L
        sigma = self.sigma if self.sigma is not None else 1.0 / L
        return tau, sigma

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ReconstructionState:
    u: np.ndarray
    v: Optional[np.ndarray] = None
    bank: Optional[FilterBank] = None
    omega: Optional[np.ndarray] = None
    u_bar: Optional[np.ndarray] = None


@dataclass
class Diagnostics:
    records: List[dict] = field(default_factory=list)
    bank: Optional[FilterBank] = None

    @property
    def objectives(self) -> List[float]:
        return [rec["objective"] for rec in self.records]

    @property
    def n_outer(self) -> int:
        return sum(1 for rec in self.records if rec["iteration"] > 0)

    def monotone(self) -> bool:
        obj = self.objectives
        return all(b <= a + 1e-9 * max(1.0, abs(a)) for a, b in zip(obj, obj[1:]))


def _fwd(A, u):
    return matvec(A, u.ravel(order="F"))


def _adj(A, w, shape):
    return rmatvec(A, w).reshape(shape, order="F")


def _check_finite(*arrays, where=""):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"non-finite iterate in {where}; step sizes are probably too large")


def pd_solve(A: SystemMatrix, g: np.ndarray, bank: FilterBank, v: np.ndarray, lam: float,
             params: SolverParams, u0: Optional[np.ndarray] = None, L: Optional[float] = None,
             callback: Optional[Callable[[int, np.ndarray], None]] = None) -> np.ndarray:
    """Primal-dual solver for ``min 1/2 ||A u - g||^2 + lam ||W^T v - u||^2``.

    Runs exactly ``params.n1`` iterations starting from ``u0`` (zero if not
    given) with a zero dual variable.  ``callback(l, u)`` is invoked after
    every iteration.
    """
    shape = v.shape[1:]
    g = np.asarray(g, dtype=np.float64).ravel()
    if L is None:
        L = operator_norm(A, params.power_iters)
    tau, sigma = params.steps(L)
    theta = params.theta
    target = frame.synthesis(bank, v)
    u = np.zeros(shape) if u0 is None else np.array(u0, dtype=np.float64).reshape(shape)
    u_bar = u.copy()
    omega = np.zeros_like(g)
    a = 2.0 * lam * tau
    for it in range(params.n1):
        omega = (omega + sigma * (_fwd(A, u_bar) - g)) / (1.0 + sigma)
        u_prev = u
        u = (a * target + u - tau * _adj(A, omega, shape)) / (a + 1.0)
        u_bar = u + theta * (u - u_prev)
        if it % 100 == 99 or it == params.n1 - 1:
            _check_finite(u, omega, where="pd_solve")
        if callback is not None:
            callback(it + 1, u)
    return u


def subproblem_residual(A: SystemMatrix, g: np.ndarray, u: np.ndarray, bank: FilterBank,
                        v: np.ndarray, lam: float) -> float:
    """``||A^T (A u - g) + 2 lam (u - W^T v)|| / ||A^T g||``."""
    shape = u.shape
    g = np.asarray(g, dtype=np.float64).ravel()
    grad = _adj(A, _fwd(A, u) - g, shape) + 2.0 * lam * (u - frame.synthesis(bank, v))
    denom = np.linalg.norm(rmatvec(A, g))
    return float(np.linalg.norm(grad) / max(denom, 1e-300))


def objective_eq12(A: SystemMatrix, g: np.ndarray, u: np.ndarray, v: np.ndarray,
                   bank: FilterBank, lam: float, gamma1: float) -> float:
    """Relaxed objective ``||Au-g||^2 + lam (||Wu - v||^2 + gamma2^2 ||v||_0)``.

    Here ``gamma2^2 = gamma1^2 / lam``.
    """
    g = np.asarray(g, dtype=np.float64).ravel()
    r = _fwd(A, u) - g
    f = frame.analysis(bank, u) - v
    return float(r @ r + lam * np.sum(f * f) + gamma1 ** 2 * np.count_nonzero(v))


def gradient(u: np.ndarray) -> np.ndarray:
    """Forward differences with a zero difference at the far boundary."""
    d = np.zeros((2,) + u.shape)
    d[0, :-1, :] = u[1:, :] - u[:-1, :]
    d[1, :, :-1] = u[:, 1:] - u[:, :-1]
    return d


def divergence(p: np.ndarray) -> np.ndarray:
    """Negative adjoint of :func:`gradient`."""
    px = p[0].copy()
    pz = p[1].copy()
    px[-1, :] = 0.0
    pz[:, -1] = 0.0
    out = px + pz
    out[1:, :] -= px[:-1, :]
    out[:, 1:] -= pz[:, :-1]
    return out


def total_variation(u: np.ndarray) -> float:
    d = gradient(u)
    return float(np.sum(np.sqrt(d[0] ** 2 + d[1] ** 2)))


def tv_objective(A: SystemMatrix, g: np.ndarray, u: np.ndarray, lambda_tv: float) -> float:
    r = _fwd(A, u) - np.asarray(g, dtype=np.float64).ravel()
    return float(0.5 * (r @ r) + lambda_tv * total_variation(u))


def tv_reconstruct(A: SystemMatrix, g: np.ndarray, shape: Tuple[int, int], lambda_tv: float,
                   n_iter: int, L: Optional[float] = None, power_iters: int = 200) -> np.ndarray:
    """``min 1/2 ||A u - g||^2 + lambda_tv TV(u)`` by primal-dual iterations.

    TV is isotropic with forward differences and reflexive boundary.  The
    gradient block is rescaled to the norm of ``A`` so both dual blocks
    share one step size; the minimizer is unchanged.
    """
    if lambda_tv <= 0:
        raise ValueError("lambda_tv must be positive")
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    g = np.asarray(g, dtype=np.float64).ravel()
    if L is None:
        L = operator_norm(A, power_iters)
    if L == 0.0:
        return np.zeros(shape)
    c = L / math.sqrt(8.0)
    # ||[A; c grad]||^2 <= L^2 + 8 c^2
    step = 1.0 / (L * math.sqrt(2.0))
    tau = sigma = step
    radius = lambda_tv / c
    u = np.zeros(shape)
    u_bar = u.copy()
    y = np.zeros_like(g)
    z = np.zeros((2,) + tuple(shape))
    for it in range(n_iter):
        y = (y + sigma * (_fwd(A, u_bar) - g)) / (1.0 + sigma)
        z = z + sigma * c * gradient(u_bar)
        mag = np.maximum(1.0, np.sqrt(z[0] ** 2 + z[1] ** 2) / radius)
        z = z / mag
        u_prev = u
        u = u - tau * (_adj(A, y, shape) - c * divergence(z))
        u_bar = 2.0 * u - u_prev
        if it % 100 == 99 or it == n_iter - 1:
            _check_finite(u, y, where="tv_reconstruct")
    return u


def reconstruct(A: SystemMatrix, g: np.ndarray, shape: Tuple[int, int], params: SolverParams,
                u0: Optional[np.ndarray] = None,
                log: Optional[Callable[[dict], None]] = None) -> Tuple[np.ndarray, Diagnostics]:
    """Adaptive tight-frame reconstruction by alternating minimization.

    Starts from the TV solution (or ``u0``), then per outer iteration learns
    the bank on the current image, hard-thresholds its coefficients and
    re-solves for the image.  Stops after ``params.n2`` rounds or when the
    relative image change drops below ``params.eps``.
    """
    t_start = time.perf_counter()
    g = np.asarray(g, dtype=np.float64).ravel()
    L = operator_norm(A, params.power_iters)
    diag = Diagnostics()
    if u0 is None:
        u = tv_reconstruct(A, g, shape, params.lambda_tv, params.tv_iter, L=L)
    else:
        u = np.array(u0, dtype=np.float64).reshape(shape)
    bank = frame.spectral_initial_bank(params.r)
    thresh = params.threshold

    def record(k, v, rel):
        res = _fwd(A, u) - g
        rec = {
            "iteration": k,
            "objective": objective_eq12(A, g, u, v, bank, params.lam, params.gamma1),
            "data_residual": float(np.linalg.norm(res)),
            "frame_residual": float(np.linalg.norm(frame.analysis(bank, u) - v)),
            "nnz": int(np.count_nonzero(v)),
            "rel_change": rel,
            "elapsed": time.perf_counter() - t_start,
        }
        diag.records.append(rec)
        logger.info("outer %d: objective %.6g, rel change %.3g", k, rec["objective"], rel)
        if log is not None:
            log(rec)

    record(0, frame.hard_threshold(frame.analysis(bank, u), thresh), float("nan"))
    for k in range(1, params.n2 + 1):
        bank = frame.learn_filter_bank(u, bank, thresh, params.n_alt, rtol=1e-8)
        v = frame.hard_threshold(frame.analysis(bank, u), thresh)
        u_new = pd_solve(A, g, bank, v, params.lam, params, u0=u, L=L)
        rel = float(np.linalg.norm(u_new - u) / max(np.linalg.norm(u), 1e-30))
        u = u_new
        record(k, v, rel)
        if rel < params.eps:
            break
    diag.bank = bank
    if not diag.monotone():
        logger.info("relaxed objective was not monotone over the outer iterations")
    return u, diag
