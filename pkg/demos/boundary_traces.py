"""Boundary pairings of two mollifier families at height eps.

The signed family u has vanishing pairings, but its positive part grows like
eps^(-1/2): u has a zero trace while u+ has none.  Without the eps^(-1/2)
scaling the positive part converges to psi(0).
"""

import numpy as np

from halfspace.weakform import BoundaryProfile, counterexample_bounds, counterexample_field, lim_trace

psi = BoundaryProfile("bump", [0.0], 1.0)
print(f"{'eps':>8} {'T(u)':>12} {'bound':>10} {'T(u+)':>10} {'lower':>10} {'T(v+)':>10}")
for r in counterexample_bounds(psi, ladder=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5)):
    print(f"{r.eps:8.0e} {r.u_pairing:12.3e} {r.u_bound:10.3e} {r.uplus_pairing:10.3f} "
          f"{r.uplus_bound:10.3f} {r.vplus_pairing:10.6f}")
    assert r.u_ok and (r.uplus_ok is not False)

print("u+ trace diverges:", lim_trace(counterexample_field("u+"), psi).diverges)
print("v+ trace limit   :", lim_trace(counterexample_field("v+"), psi).limit, " psi(0) =", psi(np.zeros((1, 1)))[0])
