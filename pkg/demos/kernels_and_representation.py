"""Green and Poisson kernels of the half-space, and a represented field.

Builds u = h x_N + P[nu] + G[mu] for a Gaussian boundary density and a unit
mass, then checks the weak formulation and the boundary trace.
"""

import math

import numpy as np

from halfspace.kernels import green, poisson
from halfspace.measures import load_measure
from halfspace.potentials import RepresentationTriple, estimate_h, represent
from halfspace.weakform import battery, battery_profiles, lim_trace, weak_residual

x = np.array([0.0, 1.0])
print("G(x, (0, 2))      =", float(green(x, [0.0, 2.0])), " ln3/2pi =", math.log(3) / (2 * math.pi))
print("K(x, 0)           =", float(poisson(x, [0.0])), " 1/pi    =", 1 / math.pi)

# G vanishes linearly at the boundary with slope K
for t in (1e-2, 1e-4, 1e-6):
    print(f"G(x, (0.3, {t:g})) / {t:g} = {float(green(x, [0.3, t])) / t:.10f}")
print("K(x, 0.3)         =", float(poisson(x, [0.3])))

nu = load_measure({"dim": 2, "side": "boundary", "density": {"name": "gauss"}})
mu = load_measure({"dim": 2, "atoms": [{"loc": [0.0, 1.0], "w": 1.0}]})
t = RepresentationTriple.of(2, h=0.3, nu=nu, mu=mu)
u = represent(t)

pts = np.array([[0.0, 0.5], [1.0, 2.0], [0.0, 50.0], [0.0, 500.0]])
for p, v in zip(pts, u(pts)):
    print(f"u({p[0]:g}, {p[1]:g}) = {v:.6f}   u / x_N = {v / p[1]:.6f}")
print("estimated slope h =", round(estimate_h(u), 6))

rep = weak_residual(u, mu, nu, battery(2))
print(f"weak residual over {len(rep.labels)} test functions: max {rep.max_residual:.2e}")

psi = battery_profiles(2)[0]
tr = lim_trace(u, psi)
print("boundary pairings:", [f"{v:.6f}" for v in tr.values], "-> limit", f"{tr.limit:.8f}")
