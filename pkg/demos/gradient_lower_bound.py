"""Where the lower bound (C'_N/2)^2 x_N^2 / a2^N for |grad G|^2 fails.

Near the pole |grad G|^2 behaves like a2^(1-N), so the ratio of the bound to
the true value grows like x_N^2 / a2 as y approaches x.
"""

import numpy as np

from halfspace.estimates import audit, grad_sq_lower
from halfspace.kernels import grad_green_sq

for n in (2, 3, 4, 5):
    rep = audit(n, samples=1000, seed=7)
    bad = {k: v for k, v in rep.violations.items() if v}
    print(f"N = {n}: violations {bad}")

x = np.array([0.0, 0.0, 1.0])
print("\n  |y - x|   bound / |grad G|^2")
for d in (1.0, 0.3, 0.1, 0.03, 0.01):
    y = x + np.array([d, 0.0, 0.0])
    print(f"  {d:7.2f}   {float(grad_sq_lower(x, y) / grad_green_sq(x, y)):10.3f}")
