"""Conjugate points on a shrinking round sphere, against the closed-form Jacobi angle.

A geodesic through the chart origin of S^2 with c(tau) = c0 + 2 tau rotates its
normal Jacobi field by 4 |v| sqrt(a) arctan(s / sqrt(a)), a = c0 / 2; every
multiple of pi is a conjugate point.  The scan should reproduce those values.
"""

import numpy as np

from lmorse import ShrinkingSphere, conjugate_scan, shoot

c0, speed, tau_bar = 0.01, 20.0, 1.0
path = shoot(ShrinkingSphere(2, c0), np.zeros(2), np.array([speed, 0.0]), tau_bar, tol=1e-12)
report = conjugate_scan(path)

a = c0 / 2
total = 4 * speed * np.sqrt(a) * np.arctan(path.s_max / np.sqrt(a))
j = np.arange(1, int(total // np.pi) + 1)
expected = np.sqrt(a) * np.tan(j * np.pi / (4 * speed * np.sqrt(a)))

print(f"angle at tau_bar: {total:.4f} rad -> {len(j)} conjugate points expected")
for p, s_exp in zip(report.points, expected):
    print(f"  tau = {p.tau:.12f}  (closed form {s_exp ** 2:.12f}, multiplicity {p.multiplicity})")
