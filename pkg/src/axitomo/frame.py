"""Data-driven single-level tight frame.

A bank of ``r*r`` filters, each ``r x r``, is stored as the ``r^2 x r^2``
matrix ``B`` whose rows are the flattened filters.  With periodic patches
``G`` (one column per pixel) the analysis coefficients are ``V = B G``.
The frame is tight (``W^T W = I``) exactly when ``B^T B = E / r^2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional

import numpy as np


@dataclass
class FilterBank:
    r: int
    B: np.ndarray

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=np.float64)
        if self.B.shape != (self.r * self.r, self.r * self.r):
            raise ValueError(f"filter matrix must be {self.r ** 2}x{self.r ** 2}, got {self.B.shape}")

    @property
    def filters(self) -> np.ndarray:
        """Filters as an ``(r^2, r, r)`` array."""
        return self.B.reshape(-1, self.r, self.r)

    def constraint_error(self) -> float:
        """``max |B^T B - E / r^2|``."""
        k = self.r * self.r
        return float(np.max(np.abs(self.B.T @ self.B - np.eye(k) / k)))

    def to_json(self) -> str:
        return json.dumps({"r": self.r, "filters": self.B.ravel().tolist()})

    @classmethod
    def from_json(cls, text: str) -> "FilterBank":
        d = json.loads(text)
        r = int(d["r"])
        return cls(r, np.asarray(d["filters"], dtype=np.float64).reshape(r * r, r * r))


def _offsets(r: int):
    c = r // 2
    return [(a - c, b - c) for a in range(r) for b in range(r)]


def _check_r(r: int, shape) -> None:
    if r < 1 or r % 2 == 0:
        raise ValueError(f"patch size must be odd and positive, got {r}")
    if r > min(shape):
        raise ValueError(f"patch size {r} exceeds image dimensions {shape}")


def extract_patches(image: np.ndarray, r: int) -> np.ndarray:
    """``r^2 x N`` matrix whose column ``j`` is the periodic patch around pixel ``j``.

    Pixels are numbered in C order; patch entries are in lexicographic
    (row-major) order of the ``r x r`` neighbourhood.
    """
    image = np.asarray(image, dtype=np.float64)
    _check_r(r, image.shape)
    rows = [np.roll(image, (-da, -db), axis=(0, 1)).ravel() for da, db in _offsets(r)]
    return np.stack(rows)


def _unpatch(P: np.ndarray, r: int, shape) -> np.ndarray:
    """Adjoint of :func:`extract_patches`."""
    out = np.zeros(shape)
    for k, (da, db) in enumerate(_offsets(r)):
        out += np.roll(P[k].reshape(shape), (da, db), axis=(0, 1))
    return out


def analysis(bank: FilterBank, image: np.ndarray) -> np.ndarray:
    """Coefficient stack of shape ``(r^2,) + image.shape``."""
    image = np.asarray(image, dtype=np.float64)
    V = bank.B @ extract_patches(image, bank.r)
    return V.reshape((-1,) + image.shape)


def synthesis(bank: FilterBank, coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    k = bank.r * bank.r
    if coeffs.ndim != 3 or coeffs.shape[0] != k:
        raise ValueError(f"expected coefficient stack with {k} channels, got shape {coeffs.shape}")
    shape = coeffs.shape[1:]
    _check_r(bank.r, shape)
    P = bank.B.T @ coeffs.reshape(k, -1)
    return _unpatch(P, bank.r, shape)


def hard_threshold(coeffs: np.ndarray, thresh: float) -> np.ndarray:
    """Zero every entry with ``|v| <= thresh``."""
    if thresh < 0:
        raise ValueError("threshold must be nonnegative")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return np.where(np.abs(coeffs) > thresh, coeffs, 0.0)


def procrustes_update(V: np.ndarray, G: np.ndarray) -> FilterBank:
    """Bank minimizing ``||V - B G||_F`` subject to ``B^T B = E / r^2``."""
    k = G.shape[0]
    V = np.asarray(V, dtype=np.float64).reshape(k, -1)
    r = int(round(np.sqrt(k)))
    if r * r != k or V.shape[1] != G.shape[1]:
        raise ValueError(f"incompatible shapes V{V.shape}, G{G.shape}")
    UL, _, URt = np.linalg.svd(V @ G.T)
    return FilterBank(r, (UL @ URt) / r)


def frame_objective(V: np.ndarray, bank: FilterBank, G: np.ndarray, thresh: float) -> float:
    """``||V - B G||^2 + thresh^2 ||V||_0``."""
    V = np.asarray(V).reshape(bank.B.shape[0], -1)
    resid = V - bank.B @ G
    return float(np.sum(resid * resid) + thresh * thresh * np.count_nonzero(V))


def learn_filter_bank(image: np.ndarray, initial_bank: FilterBank, thresh: float,
                      n_alt: int = 20, rtol: float = 0.0,
                      history: Optional[List[float]] = None) -> FilterBank:
    """Alternate hard thresholding and the Procrustes bank update.

    Each alternation records the objective after the bank update into
    ``history`` when given.  With ``rtol > 0`` the loop stops once the
    relative objective change falls below it.
    """
    if n_alt < 1:
        raise ValueError("n_alt must be >= 1")
    G = extract_patches(image, initial_bank.r)
    bank = initial_bank
    prev = None
    for _ in range(n_alt):
        V = hard_threshold(bank.B @ G, thresh)
        bank = procrustes_update(V, G)
        obj = frame_objective(V, bank, G, thresh)
        if history is not None:
            history.append(obj)
        if prev is not None and obj > prev + 1e-9 * max(1.0, abs(prev)):
            raise ArithmeticError(f"frame objective increased: {prev} -> {obj}")
        if rtol > 0 and prev is not None and abs(prev - obj) <= rtol * max(abs(prev), 1e-300):
            break
        prev = obj
    return bank


def spectral_initial_bank(r: int = 7) -> FilterBank:
    """Separable DCT-II basis, scaled for the tight-frame constraint."""
    if r < 1 or r % 2 == 0:
        raise ValueError(f"patch size must be odd and positive, got {r}")
    k = np.arange(r)
    C = np.cos(np.pi * (k[None, :] + 0.5) * k[:, None] / r)
    C[0] *= np.sqrt(1.0 / r)
    C[1:] *= np.sqrt(2.0 / r)
    return FilterBank(r, np.kron(C, C) / r)
