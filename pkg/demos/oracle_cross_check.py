"""Second variation from brute force versus the index form.

The finite-difference oracle never touches the geodesic or Jacobi right-hand
sides: it displaces the sampled geodesic by exp(eps Y), measures discrete
L-length and takes a Richardson-extrapolated second difference.
"""

import numpy as np

from lmorse import FieldAlong, ShrinkingCylinder, index_form, shoot
from lmorse.oracle import fd_second_variation

bg = ShrinkingCylinder(3, 1.0)
path = shoot(bg, np.zeros(3), np.array([0.8, -0.4, 1.0]), 1.0, tol=1e-12)
rng = np.random.default_rng(0)
for _ in range(3):
    coeffs = rng.normal(size=(4, 3))
    coeffs[0] = 0.0                                       # Y(0) = 0
    Y = FieldAlong.polynomial(coeffs, 0.0, path.s_max)
    I = index_form(path, Y, Y)
    fd = fd_second_variation(bg, path, Y)
    print(f"I(Y,Y) = {I: .8f}   finite differences = {fd: .8f}   rel. gap {abs(I - fd) / abs(I):.1e}")
