"""Ring integrals on dyadic scales for a few fields.

The x_N-weighted ring integral over cylindrical annuli tends to 0 for bounded
fields and for fields that grow slower than |x|, while the classical
whole-space ring mean of u = 1 stays constant.
"""

import numpy as np

from halfspace.corpus import get_entry
from halfspace.fields import ScalarField
from halfspace.rings import green_ring_integral, scan

x = np.array([0.0, 1.0])
for name, condition, levels in [("constant", "(R)", 8), ("constant", "(R+0)", 16),
                                ("sqrt_growth", "(R+0)", 40), ("unotl1c", "(R+0)", 8)]:
    rep = scan(get_entry(name).field(2), 0.0, x, condition, levels=levels)
    tail = ", ".join(f"{v:.3g}" for v in rep.values[-3:])
    print(f"{name:12s} {condition:6s} last values [{tail}]  slope {rep.slope:+.3f}  -> {rep.verdict}")

# level-set rings of the Green function recover harmonic fields
u = ScalarField(2, lambda p: 2 + 3 * p[:, 1])
for R in (8.0, 16.0, 32.0):
    print(f"Green ring mean of 2 + 3 x_N at (0, 1), R = {R:g}: {green_ring_integral(u, x, R):.6f}")
