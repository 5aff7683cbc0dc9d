"""Watch the discrete index form pick up one negative direction per conjugate point.

The endpoint tau_bar is swept past the first three onsets of a fast sphere
geodesic; the number of negative eigenvalues of the assembled index form
jumps by one at each, matching the conjugate count on [0, tau_bar).
"""

import numpy as np

from lmorse import ShrinkingSphere, conjugate_scan, morse_index, shoot

bg = ShrinkingSphere(2, 0.01)
v = np.array([40.0, 0.0])
full = conjugate_scan(shoot(bg, np.zeros(2), v, 0.04, tol=1e-12))
onsets = [p.s for p in full.points][:3]

print(" s_max      index(m=128)  conjugate count")
for s_end in np.linspace(0.02, 1.1 * onsets[-1], 12):
    path = shoot(bg, np.zeros(2), v, s_end ** 2, tol=1e-12)
    count = sum(s < s_end for s in onsets)
    print(f" {s_end:.5f}   {morse_index(path, 128):>5d}          {count:>3d}")
