"""
The imaging matrix of an axis-symmetric object
==============================================

A single cone-beam projection of an object that only depends on radius
and height is a linear map from an ``(m, 2n)`` grid of annular-cylinder
voxels to the detector.  This script builds that matrix for a small grid,
checks it against the exact chord length of a uniform cylinder, and shows
how the mirror symmetries cut the tracing work by four.
"""

import time

import numpy as np

from axitomo import ConeBeamGeometry, RadialGrid, build_system_matrix, matvec
from axitomo.geometry import ray_from_detector
from axitomo.projector import build_direct, operator_norm
from axitomo.sim import rasterize, uniform_cylinder, volume_to_vector

###############################################################################
# Source on the x-axis at 40, detector plane at x = -50.  The grid covers
# the unit cylinder with 32 annuli and 64 slabs.

grid = RadialGrid(m=32, n=32, dr=1 / 32, dz=1 / 32)
geom = ConeBeamGeometry(source_x=40.0, detector_x=-50.0, pitch_y=2.5 / 40, pitch_z=2.5 / 40, p=40, q=40)

t0 = time.perf_counter()
A = build_system_matrix(geom, grid)
print(f"matrix {A.shape}, nnz {A.nnz}, built in {time.perf_counter() - t0:.2f} s")

###############################################################################
# Only one detector quadrant is traced; the other three rows are mirror
# images.  Tracing every ray gives the same values.

t0 = time.perf_counter()
direct = build_direct(geom, grid)
print(f"direct build {time.perf_counter() - t0:.2f} s, identical: {A.same_values(direct)}")

###############################################################################
# A uniform cylinder projects to the plain chord length of each ray through
# the (height-clipped) cylinder.  Look at the central detector row.

g = matvec(A, volume_to_vector(rasterize(uniform_cylinder(grid), grid)))
row = g.reshape((2 * geom.p, 2 * geom.q), order="F")[:, geom.q]
ray = ray_from_detector(geom, 0, 0)
print("central-row line integrals (every 8th cell):", np.round(row[::8], 4))
print(f"ray through cell (0, 0): gamma {ray.gamma:.5f}, alpha {ray.alpha:.5f}, value {row[geom.p]:.6f}")

###############################################################################
# The largest singular value sets the primal-dual step sizes later on.

print(f"||A||_2 ~ {operator_norm(A, 200):.4f}")
