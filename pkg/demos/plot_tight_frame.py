"""
Learning a tight frame on a piecewise-constant section
======================================================

A bank of ``r*r`` filters of size ``r x r`` is a tight frame when the
filter matrix satisfies ``B^T B = I / r^2``.  Starting from the separable
cosine basis, alternating hard thresholding and an orthogonal Procrustes
update adapts the bank to an image so that fewer coefficients survive the
threshold, while analysis followed by synthesis stays the identity.
"""

import numpy as np

from axitomo.export import central_section
from axitomo.frame import analysis, hard_threshold, learn_filter_bank, spectral_initial_bank, synthesis
from axitomo.geometry import RadialGrid
from axitomo.sim import default_phantom, rasterize

grid = RadialGrid(m=64, n=64, dr=1 / 64, dz=1 / 64)
image = central_section(rasterize(default_phantom(), grid), grid)

###############################################################################
# The cosine basis already satisfies the constraint.

bank0 = spectral_initial_bank(7)
print(f"initial bank: constraint error {bank0.constraint_error():.1e}")

###############################################################################
# Twenty alternations at the desk threshold.  The objective
# ``||V - B G||^2 + thresh^2 ||V||_0`` never increases.

thresh = 0.02
history = []
bank = learn_filter_bank(image, bank0, thresh, n_alt=20, history=history)
print("objective:", " ".join(f"{h:.3f}" for h in history[::4]), f"... {history[-1]:.3f}")

###############################################################################
# Sparsity before and after learning, and perfect reconstruction.

for name, b in (("cosine", bank0), ("learned", bank)):
    v = hard_threshold(analysis(b, image), thresh)
    err = np.max(np.abs(synthesis(b, analysis(b, image)) - image))
    print(f"{name:8s} kept {np.count_nonzero(v) / v.size:6.2%} of coefficients, "
          f"reconstruction error {err:.1e}, constraint error {b.constraint_error():.1e}")
