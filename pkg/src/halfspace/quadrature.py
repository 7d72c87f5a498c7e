"""
Quadrature machinery: adaptive cubature over mapped regions, a smooth
partition of unity that moves point singularities into polar coordinates,
and vectorized composite Gauss-Legendre rules.

A *region* maps a parameter box onto a subset of ``R^N`` and reports the
Jacobian of that map.  :func:`integrate` sums adaptive cubature over a list
of regions.  Point singularities of the integrand (poles of the Green
function, atoms of a measure) are handled by splitting the integrand with a
C-infinity cutoff ``chi``: the part ``f chi`` lives in a small ball that is
integrated in polar coordinates with the radial substitution ``r = s t^2``,
and the part ``f (1 - chi)`` vanishes near the singularity.
"""

from dataclasses import dataclass, replace
from functools import lru_cache
import math

import numpy as np
from scipy.integrate import cubature

from .errors import QuadratureError

ROUNDOFF_FACTOR = 64.0


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and policies shared by all quadrature routines.

    Attributes
    ----------
    rel_tol : float
        Relative tolerance requested from every adaptive integration.
    abs_floor : float
        Absolute tolerance floor (guards integrals that are exactly zero).
    max_subdivisions : int
        Subdivision budget per adaptive call.
    singular_shell_radius : float or None
        Radius of the polar ball around each singular point.  ``None``
        picks half the distance to the nearest region boundary or other
        singular point.
    tail_policy : str
        ``"asymptotic"`` truncates unbounded domains using the explicit
        kernel decay bounds.
    seed : int
        Seed for every randomized or low-discrepancy sampler.
    directions : int
        Number of sphere directions for spherical means.
    panel_order : int
        Gauss-Legendre nodes per panel in composite rules.
    """

    rel_tol: float = 1e-6
    abs_floor: float = 1e-14
    max_subdivisions: int = 200_000
    singular_shell_radius: float | None = None
    tail_policy: str = "asymptotic"
    seed: int = 0
    directions: int = 4096
    panel_order: int = 10

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.abs_floor < 0:
            raise ValueError("abs_floor must be nonnegative")
        if self.tail_policy != "asymptotic":
            raise ValueError("only the 'asymptotic' tail policy is implemented")

    def with_(self, **changes):
        return replace(self, **changes)


DEFAULT_SPEC = QuadratureSpec()


def smooth_step(u):
    """C-infinity step: 0 for ``u <= 0``, 1 for ``u >= 1``."""
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 1, 1.0, 0.0)
    mid = (u > 0) & (u < 1)
    if np.any(mid):
        um = u[mid]
        a = np.exp(-1.0 / um)
        b = np.exp(-1.0 / (1.0 - um))
        out[mid] = a / (a + b)
    return out


def cutoff(t):
    """Radial cutoff: 1 for ``t <= 1/2``, 0 for ``t >= 1``, smooth between."""
    return smooth_step(2.0 * (1.0 - np.asarray(t, dtype=float)))


# ---------------------------------------------------------------------------
# sphere parametrization


def sphere_dirs(angles, n):
    """Map hyperspherical angles to unit vectors in ``R^n``.

    ``angles[..., 0]`` is the polar angle measured from the *last* axis so
    that region maps can split at the boundary hyperplane; the final angle is
    the azimuth in ``[0, 2 pi)``.

    Returns
    -------
    dirs : ndarray, shape (..., n)
    jac : ndarray, shape (...)
        Surface Jacobian ``prod_k sin^{n-1-k}(theta_k)``.
    """
    angles = np.asarray(angles, dtype=float)
    lead = angles.shape[:-1]
    if n == 1:
        raise ValueError("use the two-point sphere for n = 1")
    if n == 2:
        phi = angles[..., 0]
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1), np.ones(lead)
    out = np.empty(lead + (n,))
    jac = np.ones(lead)
    s = np.ones(lead)
    # coordinates are filled from the last axis backwards
    for k in range(n - 2):
        th = angles[..., k]
        out[..., n - 1 - k] = s * np.cos(th)
        jac *= np.sin(th) ** (n - 2 - k)
        s = s * np.sin(th)
    phi = angles[..., n - 2]
    out[..., 1] = s * np.cos(phi)
    out[..., 0] = s * np.sin(phi)
    return out, jac


def sphere_bounds(n):
    """Parameter box for :func:`sphere_dirs` on ``S^{n-1}``."""
    return [0.0] * (n - 1), [math.pi] * (n - 2) + [2 * math.pi]


# ---------------------------------------------------------------------------
# regions


class Box:
    """Axis-aligned box ``[lo, hi]`` with the identity parametrization."""

    def __init__(self, lo, hi, splits=None):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.dim = self.lo.size
        self.splits = splits

    def boxes(self):
        return _split_box(self.lo, self.hi, self.splits)

    def map(self, u):
        return u, np.ones(u.shape[0])

    def clearance(self, z):
        z = np.asarray(z, dtype=float)
        return float(np.min(np.concatenate([z - self.lo, self.hi - z])))


class CylShell:
    """Cylindrical shell ``rho0 <= |y' - c'| <= rho1, h0 <= y_N <= h1`` for ``N >= 3``.

    Parameters are ``(rho, angles on S^{N-2}, y_N)``; ``h_breaks`` split the
    parameter box in ``y_N``.
    """

    def __init__(self, center, rho0, rho1, h0, h1, h_breaks=()):
        self.center = np.asarray(center, dtype=float)
        self.dim = self.center.size + 1
        if self.dim < 3:
            raise ValueError("use cyl_shell_regions for N = 2")
        self.rho0, self.rho1, self.h0, self.h1 = float(rho0), float(rho1), float(h0), float(h1)
        self.h_breaks = tuple(float(h) for h in h_breaks)

    def boxes(self):
        n = self.dim
        alo, ahi = sphere_bounds(n - 1)
        a = np.array([self.rho0] + alo + [self.h0])
        b = np.array([self.rho1] + ahi + [self.h1])
        return _split_box(a, b, {n - 1: self.h_breaks})

    def map(self, u):
        n = self.dim
        rho = u[:, 0]
        dirs, jac = sphere_dirs(u[:, 1 : n - 1], n - 1)
        pts = np.empty((u.shape[0], n))
        pts[:, :-1] = self.center + rho[:, None] * dirs
        pts[:, -1] = u[:, -1]
        return pts, jac * rho ** (n - 2)

    def clearance(self, z):
        z = np.asarray(z, dtype=float)
        rz = float(np.linalg.norm(z[:-1] - self.center))
        c = [rz - self.rho0 if self.rho0 > 0 else math.inf, self.rho1 - rz, z[-1] - self.h0, self.h1 - z[-1]]
        return float(min(c))


def cyl_shell_regions(center, rho0, rho1, h0, h1, h_breaks=()):
    """Regions covering a cylindrical shell; two boxes when ``N = 2``.

    ``h_breaks`` are heights at which the regions are split.
    """
    center = np.asarray(center, dtype=float)
    if h1 <= h0 or rho1 <= rho0:
        return []
    if center.size >= 2:
        return [CylShell(center, rho0, rho1, h0, h1, h_breaks)]
    c = float(center[0])
    splits = {1: list(h_breaks)}
    if rho0 == 0:
        return [Box([c - rho1, h0], [c + rho1, h1], splits)]
    return [Box([c - rho1, h0], [c - rho0, h1], splits), Box([c + rho0, h0], [c + rho1, h1], splits)]


class RayShell:
    """Star-shaped shell ``r_lo(w) <= |y - c| <= r_hi(w)`` around ``c``.

    Parameters are ``(s, angles)`` with ``s in [0, 1]`` and
    ``r = r_lo + (r_hi - r_lo) * g(s)``, ``g(s) = s`` or ``s^2`` when
    ``graded``.  ``weight`` multiplies the integrand by a function of
    ``(r, dirs)``.

    Parameters
    ----------
    center : array_like, shape (N,)
    r_lo, r_hi : callable
        Map an array of unit directions ``(M, N)`` to radii ``(M,)``.
    graded : bool
    weight : callable, optional
    height_breaks : sequence of float, optional
        Values of the last direction component where the radial limits have
        kinks; the parameter box is split there.
    """

    def __init__(self, center, r_lo, r_hi, graded=False, weight=None, height_breaks=()):
        self.center = np.asarray(center, dtype=float)
        self.dim = self.center.size
        self.r_lo, self.r_hi = r_lo, r_hi
        self.graded = graded
        self.weight = weight
        self.height_breaks = [float(c) for c in height_breaks if -1 < c < 1]

    def boxes(self):
        n = self.dim
        alo, ahi = sphere_bounds(n)
        a = np.array([0.0] + alo)
        b = np.array([1.0] + ahi)
        splits = None
        if self.height_breaks:
            c = np.array(self.height_breaks)
            if n >= 3:
                splits = {1: list(np.arccos(c))}
            else:
                phi = np.arcsin(c)
                splits = {1: list(np.mod(phi, 2 * math.pi)) + list(math.pi - phi)}
        return _split_box(a, b, splits)

    def map(self, u):
        n = self.dim
        s = u[:, 0]
        dirs, jac = sphere_dirs(u[:, 1:], n)
        lo = self.r_lo(dirs)
        hi = self.r_hi(dirs)
        width = np.maximum(hi - lo, 0.0)
        if self.graded:
            r = lo + width * s * s
            dr = 2.0 * s * width
        else:
            r = lo + width * s
            dr = width
        pts = self.center + r[:, None] * dirs
        w = jac * dr * r ** (n - 1)
        if self.weight is not None:
            w = w * self.weight(r, dirs)
        return pts, w

    def clearance(self, z):
        return 0.0


def _split_box(a, b, splits):
    if not splits:
        return [(np.asarray(a, float), np.asarray(b, float))]
    cuts = []
    for k in range(len(a)):
        pts = [a[k]] + [p for p in sorted(set(splits.get(k, ()))) if a[k] < p < b[k]] + [b[k]]
        cuts.append(list(zip(pts[:-1], pts[1:])))
    out = []
    for combo in np.ndindex(*[len(c) for c in cuts]):
        lo = np.array([cuts[k][i][0] for k, i in enumerate(combo)])
        hi = np.array([cuts[k][i][1] for k, i in enumerate(combo)])
        out.append((lo, hi))
    return out


# ---------------------------------------------------------------------------
# adaptive cubature


def _rule_for(ndim):
    if ndim <= 2:
        return "gk21"
    if ndim <= 4:
        return "gk15"
    return "genz-malik"


def cubature_box(g, a, b, q, rtol=None, atol=None):
    """Adaptive cubature of a vectorized integrand over one parameter box.

    Returns
    -------
    estimate, error : ndarray or float

    Raises
    ------
    QuadratureError
        If the subdivision budget is exhausted.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b <= a):
        return 0.0, 0.0
    res = cubature(
        g,
        a,
        b,
        rule=_rule_for(a.size),
        rtol=q.rel_tol if rtol is None else rtol,
        atol=q.abs_floor if atol is None else atol,
        max_subdivisions=q.max_subdivisions,
    )
    if res.status != "converged":
        raise QuadratureError(
            f"cubature did not converge after {res.subdivisions} subdivisions",
            estimate=res.estimate,
            error=res.error,
        )
    return res.estimate, res.error


class Pyramid:
    """Pyramid with apex ``z`` over one face of a cell ``[lo, hi]`` containing ``z``.

    Parameters are ``(tau, u)`` with ``tau in [0, 1]`` and ``u`` ranging over
    the face; the point is ``z + t (face point - z)`` with ``t = tau^grade``.
    The Jacobian ``grade tau^{grade N - 1} h`` (``h`` the apex-to-face
    distance) removes a ``|y - z|^{2 - N}`` singularity at the apex; in the
    plane a grade of 2 also tames the logarithm.
    """

    def __init__(self, apex, lo, hi, axis, side, grade=None):
        self.apex = np.asarray(apex, dtype=float)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.dim = self.apex.size
        self.axis = int(axis)
        self.side = float(side)
        self.keep = [k for k in range(self.dim) if k != self.axis]
        self.grade = (2 if self.dim == 2 else 1) if grade is None else int(grade)

    def boxes(self):
        a = np.concatenate([[0.0], self.lo[self.keep]])
        b = np.concatenate([[1.0], self.hi[self.keep]])
        return [(a, b)]

    def map(self, u):
        tau = u[:, 0]
        t = tau**self.grade
        pts = np.empty((u.shape[0], self.dim))
        z = self.apex
        pts[:, self.keep] = z[self.keep] + t[:, None] * (u[:, 1:] - z[self.keep])
        pts[:, self.axis] = z[self.axis] + t * (self.side - z[self.axis])
        dt = self.grade * tau ** (self.grade - 1)
        jac = dt * t ** (self.dim - 1) * abs(self.side - z[self.axis])
        return pts, jac


def _pyramids(z, lo, hi):
    out = []
    for i in range(z.size):
        for side in (lo[i], hi[i]):
            if side != z[i]:
                out.append(Pyramid(z, lo, hi, i, side))
    return out


def _corner_pieces(lo, hi, points):
    """Pieces of a cell whose singular points all sit at cell corners."""
    corners = [z for z in points if np.all((z == lo) | (z == hi))]
    if len(corners) > 1:
        # two singular corners: halve along an axis where they differ
        k = int(np.argmax(np.abs(corners[0] - corners[1])))
        mid = 0.5 * (lo[k] + hi[k])
        hi1, lo2 = hi.copy(), lo.copy()
        hi1[k] = lo2[k] = mid
        return _corner_pieces(lo, hi1, points) + _corner_pieces(lo2, hi, points)
    if corners:
        return [(pyr, *pyr.boxes()[0]) for pyr in _pyramids(corners[0], lo, hi)]
    return [(None, lo, hi)]


def _box_pieces(box, points):
    """Split a box so that every singular point is a corner of its sub-boxes.

    Sub-boxes with a singular corner are covered by pyramids with that apex;
    the rest are integrated directly.
    """
    splits = {k: list(v) for k, v in (box.splits or {}).items()}
    for z in points:
        for k in range(box.dim):
            splits.setdefault(k, []).append(float(z[k]))
    pieces = []
    for a, b in _split_box(box.lo, box.hi, splits):
        for reg, pa, pb in _corner_pieces(a, b, points):
            pieces.append((box if reg is None else reg, pa, pb))
    return pieces


def _singular_layout(singular, regions, q):
    """Polar-ball radii for singular points inside non-box regions."""
    pts = [np.asarray(z, dtype=float) for z in singular]
    out = []
    for i, z in enumerate(pts):
        clear = max((r.clearance(z) for r in regions), default=0.0)
        if not clear > 0:
            continue
        others = [np.linalg.norm(z - w) for j, w in enumerate(pts) if j != i]
        sep = min(others, default=math.inf)
        if sep == 0:
            continue
        s = min(clear, 0.5 * sep) * 0.5
        if q.singular_shell_radius is not None:
            s = min(s, q.singular_shell_radius)
        out.append((z, s))
    return out


def integrate(f, regions, q=DEFAULT_SPEC, singular=(), rtol=None, atol=None):
    """Integrate ``f`` over the union of ``regions``.

    Parameters
    ----------
    f : callable
        Maps points ``(M, N)`` to values ``(M,)`` or ``(M, K)``.  It is never
        called at a registered singular point.
    regions : list
        Region objects (:class:`Box`, :class:`CylShell`, :class:`RayShell`).
    q : QuadratureSpec
    singular : sequence of array_like
        Points where ``f`` may be infinite.  In a :class:`Box` (including its
        boundary) such a point becomes the common apex of pyramids whose
        Jacobian vanishes there.  Points strictly inside other regions are
        excised with a smooth partition of unity and a polar ball.

    Notes
    -----
    Every piece is integrated with the relative tolerance and an absolute
    tolerance equal to its share of ``rtol`` times the sum of the pieces'
    first-pass magnitudes, so pieces whose integrals nearly vanish do not
    force needless refinement.  The absolute tolerance never drops below
    ``ROUNDOFF_FACTOR`` machine epsilons times a first-pass estimate of
    ``int |f|``, the level where cancellation makes refinement pointless.

    Returns
    -------
    estimate, error
    """
    rtol = q.rel_tol if rtol is None else rtol
    sing = [np.asarray(z, dtype=float) for z in singular]
    pieces = []
    others = []
    for reg in regions:
        if isinstance(reg, Box):
            inside = [z for z in sing if np.all(z >= reg.lo) and np.all(z <= reg.hi)]
            if inside:
                pieces += _box_pieces(reg, inside)
                continue
        else:
            others.append(reg)
        pieces += [(reg, a, b) for a, b in reg.boxes()]
    layout = _singular_layout(sing, others, q) if others else []

    def masked(pts):
        if not layout:
            return f(pts)
        keep = np.ones(pts.shape[0])
        for z, s in layout:
            keep = keep * (1.0 - cutoff(np.linalg.norm(pts - z, axis=-1) / s))
        live = keep > 0
        if np.all(live):
            return f(pts) * _bcast(keep, None)
        out = None
        if np.any(live):
            sub = f(pts[live])
            out = np.zeros((pts.shape[0],) + np.shape(sub)[1:])
            out[live] = sub * _bcast(keep[live], sub)
        return np.zeros(pts.shape[0]) if out is None else out

    jobs = []
    for reg, a, b in pieces:
        use_mask = not isinstance(reg, (Box, Pyramid))

        def g(u, reg=reg, use_mask=use_mask):
            pts, jac = reg.map(u)
            val = masked(pts) if use_mask else f(pts)
            return val * _bcast(jac, val)

        jobs.append((g, a, b))
    for z, s in layout:
        ball = RayShell(
            z,
            lambda d: np.zeros(d.shape[0]),
            lambda d, s=s: np.full(d.shape[0], s),
            graded=True,
            weight=lambda r, d, s=s: cutoff(r / s),
        )
        for a, b in ball.boxes():

            def g(u, ball=ball):
                pts, jac = ball.map(u)
                val = f(pts)
                return val * _bcast(jac, val)

            jobs.append((g, a, b))
    first = [None] * len(jobs)
    if atol is None:
        first = [cubature_box(g, a, b, q, rtol, np.inf) for g, a, b in jobs]
        scale = float(sum(np.sum(np.abs(v[0])) for v in first))
        # when the pieces cancel to roundoff, refine only down to the rounding level of |f|
        mass = float(sum(np.sum(cubature_box(lambda u, g=g: np.abs(g(u)), a, b, q, rtol, np.inf)[0])
                         for g, a, b in jobs))
        atol = max(q.abs_floor, rtol * scale / max(len(jobs), 1), ROUNDOFF_FACTOR * np.finfo(float).eps * mass)
    est = 0.0
    err = 0.0
    for (g, a, b), pre in zip(jobs, first):
        if pre is not None and np.all(pre[1] <= np.maximum(atol, rtol * np.abs(pre[0]))):
            e, r = pre
        else:
            e, r = cubature_box(g, a, b, q, rtol, atol)
        est = est + e
        err = err + r
    return est, err


def _bcast(w, like):
    if like is None:
        return w
    nd = np.ndim(like)
    return w.reshape(w.shape + (1,) * (nd - 1)) if nd > 1 else w


# ---------------------------------------------------------------------------
# composite Gauss-Legendre


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def panel_rule(breaks, order):
    """Composite Gauss-Legendre nodes for per-row breakpoints.

    Parameters
    ----------
    breaks : ndarray, shape (K, P + 1)
        Sorted breakpoints for each of ``K`` independent integrals.
    order : int

    Returns
    -------
    nodes, weights : ndarray, shape (K, P * order)
    """
    t, w = gauss_legendre(order)
    lo = breaks[:, :-1, None]
    width = (breaks[:, 1:] - breaks[:, :-1])[:, :, None]
    nodes = lo + width * t
    weights = width * w
    k = breaks.shape[0]
    return nodes.reshape(k, -1), weights.reshape(k, -1)


def refine_breaks(breaks):
    """Insert the midpoint of every panel."""
    mid = 0.5 * (breaks[:, :-1] + breaks[:, 1:])
    out = np.empty((breaks.shape[0], 2 * breaks.shape[1] - 1))
    out[:, 0::2] = breaks
    out[:, 1::2] = mid
    return out


def panel_integrate(integrand, breaks, q, order=None, max_refine=6):
    """Row-wise composite Gauss integration with an embedded error check.

    ``integrand(nodes)`` receives an array ``(K, M)`` of abscissae and returns
    values of the same shape.  Each row is integrated with orders ``p`` and
    ``p + 4`` on the same panels; rows whose estimates disagree beyond the
    tolerance get their panels halved.

    Returns
    -------
    values, errors : ndarray, shape (K,)
    """
    p = order or q.panel_order
    breaks = np.asarray(breaks, dtype=float)
    k = breaks.shape[0]
    if k == 0:
        return np.zeros(0), np.zeros(0)
    out = np.empty(k)
    errs = np.empty(k)
    todo = np.arange(k)
    b = breaks
    for _ in range(max_refine + 1):
        n1, w1 = panel_rule(b, p)
        n2, w2 = panel_rule(b, p + 4)
        v1 = np.sum(integrand(n1, todo) * w1, axis=1)
        v2 = np.sum(integrand(n2, todo) * w2, axis=1)
        e = np.abs(v2 - v1)
        ok = e <= np.maximum(q.rel_tol * np.abs(v2), q.abs_floor)
        out[todo[ok]] = v2[ok]
        errs[todo[ok]] = e[ok]
        if np.all(ok):
            return out, errs
        todo = todo[~ok]
        b = refine_breaks(b[~ok])
    raise QuadratureError(
        f"composite rule did not converge for {todo.size} of {k} evaluation points",
        estimate=v2[~ok],
        error=e[~ok],
    )

