"""
The lift ``v(xi', xi_bar) = u(xi', |xi_bar|) / |xi_bar|`` from the half-space
``R^N_+`` to ``R^{N+2}`` (``xi_bar`` in ``R^3``), its inverse, spherical means
of lifted fields, and two integral comparisons between cylindrical balls in
``R^{N+2}`` and weighted half-space integrals.

Integrals of axially symmetric functions over ``B^{*,N+2}`` reduce exactly
to the half-space: for fixed ``xi'`` the set of ``xi_bar`` with
``|xi_bar| = r`` inside the ball ``|xi_bar - (a, 0, 0)| < s`` has area
``2 pi r^2 W_s(r)`` with ``W_s(r) = 1 - clip((r^2 + a^2 - s^2) / (2 r a), -1, 1)``.
"""

import math
from typing import NamedTuple

import numpy as np
from scipy.stats import norm, qmc

from .errors import HalfSpaceError, PreconditionError
from .fields import ScalarField
from .quadrature import DEFAULT_SPEC, cyl_shell_regions, integrate
from .rings import ring_plus_integral

BAR_DIM = 3
#: probes ``2^-j`` used for the liminf on the symmetry subspace
S_PROBES = tuple(range(10, 21))


class LiftedField:
    """A function on ``R^{N+2}``, points ``(..., N+2)``.

    Attributes
    ----------
    dim : int
        Dimension ``N + 2`` of the lifted space.
    base_dim : int
        Dimension ``N`` of the half-space.
    symmetric : bool
        Set when the value depends on ``xi_bar`` only through ``|xi_bar|``.
    """

    def __init__(self, base_dim, evaluate, symmetric=True, name=None):
        self.base_dim = int(base_dim)
        self.dim = self.base_dim + 2
        self._evaluate = evaluate
        self.symmetric = bool(symmetric)
        self.name = name

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.dim:
            raise HalfSpaceError(f"lifted points need {self.dim} coordinates")
        flat = xi.reshape(-1, self.dim)
        out = np.asarray(self._evaluate(flat), dtype=float).reshape(xi.shape[:-1])
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"LiftedField({self.name or 'unnamed'}, dim={self.dim})"


def split_lifted(xi, base_dim):
    """Split lifted points into ``(xi', |xi_bar|)``."""
    xi = np.asarray(xi, dtype=float)
    return xi[..., : base_dim - 1], np.linalg.norm(xi[..., base_dim - 1 :], axis=-1)


def lift(u):
    """The lift ``v = H[u]``.

    Off the symmetry subspace ``{xi_bar = 0}`` this is ``u(xi', |xi_bar|) /
    |xi_bar|``.  On it, the liminf is approximated by the minimum of
    ``u(xi', t) / t`` over ``t = 2^-j``, ``j = 10 .. 20``.
    """
    n = u.dim

    def ev(xi):
        tang, r = split_lifted(xi, n)
        out = np.empty(xi.shape[0])
        off = r > 0
        if np.any(off):
            pts = np.concatenate([tang[off], r[off, None]], axis=1)
            out[off] = np.asarray(u(pts), dtype=float) / r[off]
        on = ~off
        if np.any(on):
            best = np.full(int(on.sum()), np.inf)
            for j in S_PROBES:
                t = 2.0**-j
                pts = np.concatenate([tang[on], np.full((int(on.sum()), 1), t)], axis=1)
                best = np.minimum(best, np.asarray(u(pts), dtype=float) / t)
            out[on] = best
        return out

    return LiftedField(n, ev, symmetric=True, name=f"lift({u.name})")


def unlift(v):
    """``u(x) = x_N v(x', x_N, 0, 0)``."""
    if not v.symmetric:
        raise HalfSpaceError("unlift needs an axially symmetric lifted field")
    n = v.base_dim

    def ev(x):
        xi = np.zeros((x.shape[0], n + 2))
        xi[:, :n] = x
        return x[:, -1] * np.asarray(v(xi), dtype=float)

    return ScalarField(n, ev, provenance="assembled", name=f"unlift({v.name})")


# ---------------------------------------------------------------------------
# spherical means


def sphere_directions(dim, count, seed=0):
    """Seeded low-discrepancy unit vectors in ``R^dim`` (scrambled Sobol' through the normal quantile)."""
    m = max(1, int(math.ceil(math.log2(max(count, 2)))))
    u = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)[:count]
    g = norm.ppf(np.clip(u, 1e-15, 1 - 1e-15))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


class SphericalMean(NamedTuple):
    mean: float
    stderr: float


def spherical_mean(v, center, r, q=DEFAULT_SPEC, replicates=8):
    """Average of ``v`` over the sphere ``|xi - center| = r``.

    Uses ``q.directions`` points split over ``replicates`` independently
    scrambled direction sets and antipodal pairs; the spread of the
    replicate means gives the standard error.

    Returns
    -------
    SphericalMean
        ``(mean, stderr)``.
    """
    r = float(r)
    if not r > 0:
        raise HalfSpaceError("radius must be positive")
    center = np.asarray(center, dtype=float).reshape(-1)
    per = max(2, q.directions // (2 * replicates))
    means = []
    for k in range(replicates):
        d = sphere_directions(v.dim, per, seed=q.seed * 1009 + k)
        d = np.concatenate([d, -d])
        means.append(float(np.mean(v(center + r * d))))
    means = np.array(means)
    err = float(np.std(means, ddof=1) / math.sqrt(replicates)) if replicates > 1 else math.nan
    return SphericalMean(float(np.mean(means)), err)


# ---------------------------------------------------------------------------
# annulus comparisons


def cap_weight(r, a, s):
    """``W_s(r)``: twice the fraction of the sphere ``|xi_bar| = r`` inside ``|xi_bar - a e_1| < s``."""
    r = np.asarray(r, dtype=float)
    if s <= 0:
        return np.zeros_like(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (r * r + a * a - s * s) / (2.0 * r * a)
    c = np.where(r > 0, c, np.where(s > a, -1.0, 1.0))
    return 1.0 - np.clip(c, -1.0, 1.0)


def lifted_cylinder_integral(u, c, x, rho, s, q=DEFAULT_SPEC):
    """``int |H[u] - c|`` over ``{rho0 <= |xi' - x'| < rho1, s0 <= |xi_bar - (x_N,0,0)| < s1}``.

    Reduced to ``2 pi int |u(y) - c y_N| y_N (W_{s1} - W_{s0})(y_N) dy`` on the
    half-space.

    Parameters
    ----------
    u : ScalarField
    c : float
    x : array_like, shape (N,)
    rho, s : tuple of float
        Ranges ``(rho0, rho1)`` and ``(s0, s1)``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    a = x[-1]
    (rho0, rho1), (s0, s1) = rho, s
    top = a + s1
    kinks = sorted({k for k in (abs(s0 - a), s0 + a, abs(s1 - a)) if 0 < k < top})
    edges = [0.0] + kinks + [top]

    def f(y):
        r = y[:, -1]
        w = cap_weight(r, a, s1) - cap_weight(r, a, s0)
        val = np.abs(np.asarray(u(y), dtype=float) - c * r)
        return np.where(w > 0, 2.0 * math.pi * val * r * w, 0.0)

    regions = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        regions += cyl_shell_regions(x[:-1], rho0, rho1, lo, hi)
    est, _ = integrate(f, regions, q, singular=u.singular_points)
    return float(est)


class Comparison(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def annulus_comparison(u, c, x, R, gamma=0.5, q=DEFAULT_SPEC, tol=None):
    """``int_{B^{*,N+2}_R} |H[u] - c| >= 2 pi int_{B*_{gamma R}(x)} |u - c y_N| y_N``.

    Raises
    ------
    PreconditionError
        Unless ``0 < gamma < 1`` and ``gamma <= sqrt(1 - d^2) - d`` with
        ``d = x_N / R``.  This is implied by the simpler sufficient condition
        ``R > 2 max(1, 1 / (sqrt(1 - gamma^2) - gamma)) x_N``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    a = x[-1]
    gamma, R = float(gamma), float(R)
    if not 0 < gamma < 1:
        raise PreconditionError("gamma must lie in (0, 1)")
    d = a / R if R > 0 else math.inf
    if not (d < 1 and gamma <= math.sqrt(1 - d * d) - d):
        raise PreconditionError("R is below the admissible threshold for this gamma")
    tol = 10 * q.rel_tol if tol is None else tol
    lhs = lifted_cylinder_integral(u, c, x, (0.0, R), (0.0, R), q)
    g = gamma * R

    def f(y):
        return np.abs(np.asarray(u(y), dtype=float) - c * y[:, -1]) * y[:, -1]

    regions = cyl_shell_regions(x[:-1], 0.0, g, max(a - g, 0.0), a + g)
    rhs, _ = integrate(f, regions, q, singular=u.singular_points)
    rhs = 2.0 * math.pi * float(rhs)
    return Comparison(lhs, rhs, bool(lhs >= rhs * (1 - tol)))


def annulus_split_bound(u, x, R, tau=0.8, q=DEFAULT_SPEC, tol=None):
    """``int_{B^{*,N+2}_{2R} minus B^{*,N+2}_{R/tau}} |H[u]| <= 8 pi int_{R < |x-y|_* < 2R} |u| y_N``.

    Raises
    ------
    PreconditionError
        Unless ``1/sqrt(2) < tau < 1`` and ``R >= 2 tau x_N / (1 - tau)``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    a = x[-1]
    tau, R = float(tau), float(R)
    if not 1 / math.sqrt(2) < tau < 1:
        raise PreconditionError("tau must lie in (1/sqrt(2), 1)")
    # the bound only uses R (1 - tau) >= 2 tau x_N, so the threshold itself is admitted
    if not R * (1 - tau) >= 2 * tau * a * (1 - 1e-12):
        raise PreconditionError("R is below 2 tau x_N / (1 - tau)")
    tol = 10 * q.rel_tol if tol is None else tol
    inner = R / tau
    lhs = lifted_cylinder_integral(u, 0.0, x, (inner, 2 * R), (0.0, inner), q)
    lhs += lifted_cylinder_integral(u, 0.0, x, (0.0, 2 * R), (inner, 2 * R), q)
    rhs = 8.0 * math.pi * ring_plus_integral(u, 0.0, x, R, q) * R ** (u.dim + 2)
    return Comparison(lhs, rhs, bool(lhs <= rhs * (1 + tol)))


def lifted_box_mc(u, c, x, rho, s, samples=2**16, seed=0):
    """Plain quasi-Monte Carlo estimate of :func:`lifted_cylinder_integral` in ``R^{N+2}``.

    Independent of the half-space reduction; used as a cross-check.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.size
    (rho0, rho1), (s0, s1) = rho, s
    v = lift(u)
    d = n + 2
    lo = np.concatenate([x[:-1] - rho1, [x[-1] - s1, -s1, -s1]])
    hi = np.concatenate([x[:-1] + rho1, [x[-1] + s1, s1, s1]])
    pts = lo + (hi - lo) * qmc.Sobol(d=d, scramble=True, seed=seed).random(samples)
    tang = np.linalg.norm(pts[:, : n - 1] - x[:-1], axis=1) if n > 1 else np.zeros(samples)
    bar = pts[:, n - 1 :] - np.array([x[-1], 0.0, 0.0])
    sb = np.linalg.norm(bar, axis=1)
    inside = (tang >= rho0) & (tang < rho1) & (sb >= s0) & (sb < s1)
    vals = np.zeros(samples)
    if np.any(inside):
        vals[inside] = np.abs(v(pts[inside]) - c)
    return float(np.prod(hi - lo) * np.mean(vals))
