"""Axisymmetric object reconstruction from a single cone-beam projection."""

from .frame import FilterBank, analysis, hard_threshold, learn_filter_bank, spectral_initial_bank, synthesis
from .geometry import ConeBeamGeometry, RadialGrid, Ray, ray_from_detector
from .projector import SystemMatrix, build_system_matrix, matvec, operator_norm, rmatvec, symmetric_matvec
from .sim import PhantomSpec, Piece, default_phantom, rasterize, rmse, simulate
from .solver import SolverParams, pd_solve, reconstruct, tv_reconstruct

__version__ = "0.1.0"

__all__ = [
    "ConeBeamGeometry", "RadialGrid", "Ray", "ray_from_detector",
    "SystemMatrix", "build_system_matrix", "matvec", "rmatvec", "symmetric_matvec", "operator_norm",
    "FilterBank", "analysis", "synthesis", "hard_threshold", "learn_filter_bank", "spectral_initial_bank",
    "SolverParams", "pd_solve", "reconstruct", "tv_reconstruct",
    "PhantomSpec", "Piece", "default_phantom", "rasterize", "simulate", "rmse",
]
