"""
Weak-formulation residuals, boundary traces and the box integration-by-parts
identity.

Test functions vanish on the boundary hyperplane.  The standard family is
the product ``phi(x', x_N) = x_N psi(x') chi(x_N / s)`` with a radial
boundary profile ``psi`` and the cutoff ``chi`` (1 on ``[0, 1]``, 0 beyond
2).  Its normal derivative on the boundary is ``psi`` itself, and its
Laplacian is available in closed form:

    Laplace phi = x_N chi Laplace' psi + psi (2 chi' / s + x_N chi'' / s^2).

A function ``u`` is a weak solution of ``-Laplace u = mu`` with boundary
measure ``nu`` when ``int u (-Laplace phi) = int phi dmu + int psi dnu`` for
every such ``phi``.
"""

from dataclasses import dataclass, field
import csv
from functools import lru_cache
import io
import json
import math

import numpy as np
from scipy.integrate import quad

from .errors import HalfSpaceError
from .fields import ScalarField
from .quadrature import DEFAULT_SPEC, Box, integrate, panel_integrate

BATTERY_VERSION = 2
DEFAULT_LADDER = (1e-1, 1e-2, 1e-3, 1e-4)
PROFILE_KINDS = ("bump", "gauss-bump", "poly-bump", "gauss-poly-bump")


# ---------------------------------------------------------------------------
# one-dimensional building blocks


def _step_parts(u):
    """Smooth step ``S(u)`` with its first two derivatives.

    ``S = 1 / (1 + exp(g))`` with ``g = 1/u - 1/(1-u)`` on ``(0, 1)``.
    """
    u = np.asarray(u, dtype=float)
    s = np.where(u >= 1, 1.0, 0.0)
    d1 = np.zeros_like(u)
    d2 = np.zeros_like(u)
    mid = (u > 0) & (u < 1)
    if np.any(mid):
        um = u[mid]
        g = 1.0 / um - 1.0 / (1.0 - um)
        g1 = -1.0 / um**2 - 1.0 / (1.0 - um) ** 2
        g2 = 2.0 / um**3 - 2.0 / (1.0 - um) ** 3
        with np.errstate(over="ignore"):
            sm = 1.0 / (1.0 + np.exp(g))
        p = sm * (1.0 - sm)
        s1 = -p * g1
        s2 = -s1 * (1.0 - 2.0 * sm) * g1 - p * g2
        s[mid], d1[mid], d2[mid] = sm, s1, s2
    return s, d1, d2


CUTOFF_KINDS = ("poly", "smooth")

# 126 t^5 - 420 t^6 + 540 t^7 - 315 t^8 + 70 t^9: a C^4 step from 0 to 1 on [0, 1]
_POLY_STEP = np.polynomial.Polynomial([0, 0, 0, 0, 0, 126, -420, 540, -315, 70])
_POLY_STEP_D = (_POLY_STEP, _POLY_STEP.deriv(1), _POLY_STEP.deriv(2))


def _poly_step_parts(u):
    u = np.asarray(u, dtype=float)
    c = np.clip(u, 0.0, 1.0)
    mid = (u > 0) & (u < 1)
    s = _POLY_STEP_D[0](c)
    d1 = np.where(mid, _POLY_STEP_D[1](c), 0.0)
    d2 = np.where(mid, _POLY_STEP_D[2](c), 0.0)
    return s, d1, d2


def cutoff_parts(t, kind="poly"):
    """Cutoff ``chi(t)`` (1 for ``t <= 1``, 0 for ``t >= 2``) and its first two derivatives.

    ``kind="poly"`` is a degree-9 polynomial step (C^4, cheap to integrate);
    ``kind="smooth"`` is the C-infinity exponential step.
    """
    if kind == "poly":
        s, d1, d2 = _poly_step_parts(2.0 - np.asarray(t, dtype=float))
    elif kind == "smooth":
        s, d1, d2 = _step_parts(2.0 - np.asarray(t, dtype=float))
    else:
        raise HalfSpaceError(f"unsupported cutoff {kind!r}; expected one of {CUTOFF_KINDS}")
    return s, -d1, d2


POLY_ORDER = 6


def _tensor_parts(t, alpha):
    """``g(t) = (1 - t^2)^k exp(-alpha t^2)`` on ``|t| < 1`` and its first two derivatives."""
    t = np.asarray(t, dtype=float)
    k = POLY_ORDER
    om = np.where(np.abs(t) < 1, 1.0 - t * t, 0.0)
    a0 = om**k
    a1 = -2.0 * k * t * om ** (k - 1)
    a2 = -2.0 * k * om ** (k - 1) + 4.0 * k * (k - 1) * t * t * om ** (k - 2)
    e0 = np.exp(-alpha * t * t)
    e1 = -2.0 * alpha * t * e0
    e2 = (4.0 * alpha * alpha * t * t - 2.0 * alpha) * e0
    return a0 * e0, a1 * e0 + a0 * e1, a2 * e0 + 2.0 * a1 * e1 + a0 * e2


def _profile_parts(kind, qq):
    """Radial profile ``p(q)`` and derivatives in ``q = |x' - c|^2 / w^2``."""
    qq = np.asarray(qq, dtype=float)
    p = np.zeros_like(qq)
    p1 = np.zeros_like(qq)
    p2 = np.zeros_like(qq)
    inside = qq < 1
    if not np.any(inside):
        return p, p1, p2
    qi = qq[inside]
    om = 1.0 - qi
    base = np.exp(1.0 - 1.0 / om)
    g1 = -1.0 / om**2
    g2 = -2.0 / om**3
    if kind == "bump":
        p[inside] = base
        p1[inside] = base * g1
        p2[inside] = base * (g1 * g1 + g2)
    elif kind == "gauss-bump":
        alpha = 1.0
        val = base * np.exp(-alpha * qi)
        p[inside] = val
        p1[inside] = val * (g1 - alpha)
        p2[inside] = val * ((g1 - alpha) ** 2 + g2)
    else:
        raise HalfSpaceError(f"unsupported profile {kind!r}; expected one of {PROFILE_KINDS}")
    return p, p1, p2


# ---------------------------------------------------------------------------
# test functions

TENSOR_KINDS = {"poly-bump": 0.0, "gauss-poly-bump": 1.0}


class BoundaryProfile:
    """Compactly supported bump ``psi`` on ``R^{N-1}`` with center ``c`` and half-width ``w``.

    ``bump`` and ``gauss-bump`` are radial and C-infinity:
    ``exp(1 - 1/(1 - q))`` (times ``exp(-q)``) with ``q = |x' - c|^2 / w^2``.
    ``poly-bump`` and ``gauss-poly-bump`` are tensor products of
    ``(1 - t^2)^6`` (times ``exp(-t^2)``) in ``t_j = (x_j - c_j) / w``; they
    are C^5 and piecewise analytic on the cube ``|t|_inf < 1``, which keeps
    cubature cheap.
    """

    def __init__(self, kind, center, width):
        if kind not in PROFILE_KINDS:
            raise HalfSpaceError(f"unsupported profile {kind!r}; expected one of {PROFILE_KINDS}")
        self.kind = kind
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.width = float(width)
        if not self.width > 0:
            raise HalfSpaceError("profile width must be positive")

    @property
    def ncoord(self):
        return self.center.size

    @property
    def tensor(self):
        return self.kind in TENSOR_KINDS

    def _q(self, xt):
        d = np.asarray(xt, dtype=float) - self.center
        return d, np.sum(d * d, axis=-1) / self.width**2

    def _factors(self, xt):
        t = (np.asarray(xt, dtype=float) - self.center) / self.width
        return _tensor_parts(t, TENSOR_KINDS[self.kind])

    def __call__(self, xt):
        if self.tensor:
            return np.prod(self._factors(xt)[0], axis=-1)
        return _profile_parts(self.kind, self._q(xt)[1])[0]

    def gradient(self, xt):
        if self.tensor:
            g0, g1, _ = self._factors(xt)
            out = np.empty(g0.shape)
            for j in range(self.ncoord):
                out[..., j] = g1[..., j] * np.prod(np.delete(g0, j, axis=-1), axis=-1)
            return out / self.width
        d, qq = self._q(xt)
        p1 = _profile_parts(self.kind, qq)[1]
        return p1[..., None] * 2.0 * d / self.width**2

    def laplacian(self, xt):
        if self.tensor:
            g0, _, g2 = self._factors(xt)
            total = 0.0
            for j in range(self.ncoord):
                total = total + g2[..., j] * np.prod(np.delete(g0, j, axis=-1), axis=-1)
            return total / self.width**2
        d, qq = self._q(xt)
        _, p1, p2 = _profile_parts(self.kind, qq)
        w2 = self.width**2
        return p2 * 4.0 * qq / w2 + p1 * 2.0 * self.ncoord / w2

    def support(self):
        return self.center - self.width, self.center + self.width

    def max_gradient(self, samples=20001):
        """``sup |grad psi|`` from dense sampling.

        Radial profiles are sampled along one ray; tensor profiles on a grid
        over the support, polished by a local maximization.
        """
        if not self.tensor:
            r = np.linspace(0.0, self.width, samples)
            pts = np.zeros((samples, self.ncoord))
            pts[:, 0] = r
            pts += self.center
            return float(np.max(np.linalg.norm(self.gradient(pts), axis=-1)))
        n1 = self.ncoord
        m = samples if n1 == 1 else max(21, int(round(2e5 ** (1.0 / n1))))
        axes = [np.linspace(-1.0, 1.0, m)] * n1
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n1)
        pts = self.center + self.width * grid
        norms = np.linalg.norm(self.gradient(pts), axis=-1)
        best = float(np.max(norms))
        if n1 > 1:
            from scipy.optimize import minimize

            res = minimize(lambda p: -np.linalg.norm(self.gradient(p[None, :])[0]), pts[np.argmax(norms)],
                           method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
            best = max(best, -float(res.fun))
        return best

    def to_dict(self):
        return {"kind": self.kind, "center": [float(c) for c in self.center], "width": self.width}


class TestFunction:
    """A smooth compactly supported function on the closed half-space vanishing on the boundary.

    Attributes
    ----------
    dim : int
    value, laplacian : callable
        Points ``(M, N)`` to values ``(M,)``.
    gradient : callable
        Points ``(M, N)`` to gradients ``(M, N)``.
    lo, hi : ndarray
        A box containing the support.
    profile : BoundaryProfile or None
        ``psi = d phi / d x_N`` on the boundary, when ``phi`` has product form.
    label : str
    splits : dict, optional
        Axis index to coordinates where ``phi`` changes analytic form;
        volume integrals are split there.
    """

    def __init__(self, dim, value, laplacian, gradient, lo, hi, profile=None, label="", splits=None):
        self.dim = int(dim)
        self.value = value
        self.laplacian = laplacian
        self.gradient = gradient
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.profile = profile
        self.label = label
        self.splits = dict(splits or {})

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def normal_derivative_at_boundary(self, xt):
        """``d phi / d x_N`` at ``(x', 0)``."""
        xt = np.asarray(xt, dtype=float)
        pts = np.concatenate([xt, np.zeros(xt.shape[:-1] + (1,))], axis=-1)
        return self.gradient(pts)[..., -1]

    def __repr__(self):
        return f"TestFunction({self.label!r})"


def make_test_function(psi, cutoff_scale=1.0, cutoff="poly"):
    """Product test function ``x_N psi(x') chi(x_N / s)``.

    Parameters
    ----------
    psi : BoundaryProfile or dict
        A profile, or a mapping with ``kind``, ``center``, ``width``.
    cutoff_scale : float
        ``s``; the support in ``x_N`` is ``[0, 2 s]``.
    cutoff : {"poly", "smooth"}
        Shape of ``chi`` between ``s`` and ``2 s`` (see :func:`cutoff_parts`).
    """
    if isinstance(psi, dict):
        psi = BoundaryProfile(psi.get("kind", "bump"), psi["center"], psi.get("width", 1.0))
    if not isinstance(psi, BoundaryProfile):
        raise HalfSpaceError("psi must be a BoundaryProfile or a profile mapping")
    s = float(cutoff_scale)
    if not s > 0:
        raise HalfSpaceError("cutoff scale must be positive")
    if cutoff not in CUTOFF_KINDS:
        raise HalfSpaceError(f"unsupported cutoff {cutoff!r}; expected one of {CUTOFF_KINDS}")
    dim = psi.ncoord + 1

    def value(x):
        xn = x[..., -1]
        return xn * psi(x[..., :-1]) * cutoff_parts(xn / s, cutoff)[0]

    def laplacian(x):
        xt, xn = x[..., :-1], x[..., -1]
        c0, c1, c2 = cutoff_parts(xn / s, cutoff)
        return xn * c0 * psi.laplacian(xt) + psi(xt) * (2.0 * c1 / s + xn * c2 / s**2)

    def gradient(x):
        xt, xn = x[..., :-1], x[..., -1]
        c0, c1, _ = cutoff_parts(xn / s, cutoff)
        out = np.empty(x.shape)
        out[..., :-1] = (xn * c0)[..., None] * psi.gradient(xt)
        out[..., -1] = psi(xt) * (c0 + xn * c1 / s)
        return out

    lo, hi = psi.support()
    splits = {k: [float(c)] for k, c in enumerate(psi.center)}
    splits[dim - 1] = [s]
    label = f"{psi.kind}@{np.round(psi.center, 3).tolist()}/w{psi.width:g}/s{s:g}"
    if cutoff != "poly":
        label += f"/{cutoff}"
    return TestFunction(dim, value, laplacian, gradient, np.append(lo, 0.0), np.append(hi, 2.0 * s),
                        profile=psi, label=label, splits=splits)


def box_test_function(lo, hi):
    """``prod_i sin(pi (x_i - lo_i) / L_i)`` on a box; zero on the box boundary, not on its normal derivative."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    L = hi - lo
    k = math.pi / L
    dim = lo.size

    def parts(x):
        t = k * (x - lo)
        return np.sin(t), np.cos(t)

    def value(x):
        s, _ = parts(x)
        return np.prod(s, axis=-1)

    def laplacian(x):
        return -np.sum(k * k) * value(x)

    def gradient(x):
        s, c = parts(x)
        out = np.empty(x.shape)
        for i in range(dim):
            others = np.prod(np.delete(s, i, axis=-1), axis=-1)
            out[..., i] = k[i] * c[..., i] * others
        return out

    return TestFunction(dim, value, laplacian, gradient, lo, hi, label="box-sine")


BATTERY_PROFILES = (
    ("poly-bump", 0.0, 1.0),
    ("poly-bump", 0.6, 0.8),
    ("gauss-poly-bump", -0.9, 1.5),
    ("poly-bump", 1.7, 1.2),
    ("gauss-poly-bump", 0.3, 2.5),
)


def battery_profiles(dim):
    """The five boundary profiles of :func:`battery`."""
    n1 = dim - 1
    out = []
    for k, (kind, c0, w) in enumerate(BATTERY_PROFILES):
        c = np.zeros(n1)
        c[0] = c0
        if n1 > 1:
            c[1:] = 0.25 * ((-1) ** k)
        out.append(BoundaryProfile(kind, c, w))
    return out


def battery(dim):
    """The fixed battery (version ``BATTERY_VERSION``): five boundary profiles times cutoff scales ``{1, 2}``."""
    return [make_test_function(psi, s) for psi in battery_profiles(dim) for s in (1.0, 2.0)]


# ---------------------------------------------------------------------------
# measure pairings


def _density_pairing(measure, fn, lo, hi, q):
    """``int fn d(density part)`` over the box ``[lo, hi]`` (interior or boundary coordinates)."""
    total = 0.0
    for d in measure.densities:
        if d.weight == 0:
            continue
        a, b = lo.copy(), hi.copy()
        if d.box is not None:
            a, b = np.maximum(a, d.box[0]), np.minimum(b, d.box[1])
        elif d.localized:
            a, b = np.maximum(a, d.center - d.extent), np.minimum(b, d.center + d.extent)
        if np.any(b <= a):
            continue
        est, _ = integrate(lambda p: fn(p) * d(p), [Box(a, b)], q)
        total += float(est)
    return total


def pair_interior(mu, phi, q=DEFAULT_SPEC):
    """``int phi dmu``."""
    total = 0.0
    for loc, w in mu.atoms:
        total += w * float(phi(loc[None, :])[0])
    return total + _density_pairing(mu, phi, phi.lo, phi.hi, q)


def pair_boundary(nu, phi, q=DEFAULT_SPEC):
    """``int (d phi / d x_N)(y', 0) dnu(y')``."""
    psi = phi.profile if phi.profile is not None else phi.normal_derivative_at_boundary
    total = 0.0
    for loc, w in nu.atoms:
        total += w * float(psi(loc[None, :])[0])
    return total + _density_pairing(nu, psi, phi.lo[:-1], phi.hi[:-1], q)


def _volume(u, fn, lo, hi, q, splits=None):
    """``int u fn`` over a box, part by part when ``u`` has parts."""
    if u.parts:
        return sum(_volume(p, fn, lo, hi, q, splits) for p in u.parts)
    inside = [p for p in u.singular_points if np.all(p >= lo) and np.all(p <= hi)]
    est, _ = integrate(lambda y: np.asarray(u(y), dtype=float) * fn(y), [Box(lo, hi, splits)], q, singular=inside)
    return float(est)


# ---------------------------------------------------------------------------
# weak residuals


@dataclass
class WeakResidualReport:
    """Per-test-function terms of the weak formulation."""

    labels: list
    lhs: list
    interior: list
    boundary: list
    residuals: list
    scales: list
    mode: str = "equality"

    @property
    def max_residual(self):
        return max(self.residuals) if self.residuals else 0.0

    def rows(self):
        for row in zip(self.labels, self.lhs, self.interior, self.boundary, self.residuals, self.scales):
            yield row

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["test", "lhs", "interior", "boundary", "residual", "scale"])
        for label, *nums in self.rows():
            w.writerow([label] + [repr(float(v)) for v in nums])
        return buf.getvalue()

    def to_dict(self):
        return {
            "mode": self.mode,
            "max_residual": float(self.max_residual),
            "tests": [
                dict(zip(["test", "lhs", "interior", "boundary", "residual", "scale"], [r[0]] + [float(v) for v in r[1:]]))
                for r in self.rows()
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def weak_residual(u, mu, nu, tests=None, q=DEFAULT_SPEC, mode="equality", floor=1e-12):
    """Relative residuals of ``int u (-Laplace phi) = int phi dmu + int psi dnu``.

    In ``"inequality"`` mode only an excess of the right-hand side counts
    (``u`` is then tested as a supersolution with the given data).

    Returns
    -------
    WeakResidualReport
    """
    if mode not in ("equality", "inequality"):
        raise HalfSpaceError("mode must be 'equality' or 'inequality'")
    tests = battery(u.dim) if tests is None else tests
    rep = WeakResidualReport([], [], [], [], [], [], mode)
    for phi in tests:
        lhs = _volume(u, lambda y: -phi.laplacian(y), phi.lo, phi.hi, q, phi.splits)
        a = pair_interior(mu, phi, q)
        b = pair_boundary(nu, phi, q)
        scale = max(abs(lhs), abs(a), abs(b), floor)
        diff = lhs - a - b
        res = abs(diff) if mode == "equality" else max(0.0, -diff)
        rep.labels.append(phi.label)
        rep.lhs.append(lhs)
        rep.interior.append(a)
        rep.boundary.append(b)
        rep.residuals.append(res / scale)
        rep.scales.append(scale)
    return rep


# ---------------------------------------------------------------------------
# boundary pairings and traces


def boundary_pairing(u, psi, eps, q=DEFAULT_SPEC):
    """``T_eps(psi) = int psi(x') u(x', eps) dx'``.

    Breakpoints are placed at the field's focus points (if any) at graded
    multiples of their widths.
    """
    eps = float(eps)
    lo, hi = psi.support()
    n1 = psi.ncoord
    focus_pts, focus_w = (np.zeros((0, n1)), np.zeros(0))
    if u.focus is not None:
        focus_pts, focus_w = u.focus(eps)
        focus_pts = np.asarray(focus_pts, dtype=float).reshape(-1, n1)
        focus_w = np.asarray(focus_w, dtype=float).reshape(-1)

    def field_on_plane(xt):
        pts = np.concatenate([xt, np.full(xt.shape[:-1] + (1,), eps)], axis=-1)
        return np.asarray(u(pts), dtype=float)

    if n1 == 1:
        marks = [np.linspace(lo[0], hi[0], 17)]
        for c, w in zip(focus_pts[:, 0], focus_w):
            steps = w * np.array([0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0])
            marks.append(c + steps)
            marks.append(c - steps)
        b = np.concatenate(marks)
        b = np.unique(np.clip(b, lo[0], hi[0]))[None, :]

        def f(nodes, rows):
            flat = nodes.reshape(-1, 1)
            return (psi(flat) * field_on_plane(flat)).reshape(nodes.shape)

        val, _ = panel_integrate(f, b, q)
        return float(val[0])
    splits = {}
    for k in range(n1):
        cuts = []
        for c, w in zip(focus_pts[:, k], focus_w):
            for m in (0.0, 1.0, 4.0, 16.0):
                cuts += [c - m * w, c + m * w]
        splits[k] = sorted({float(v) for v in cuts if lo[k] < v < hi[k]})
    est, _ = integrate(lambda xt: psi(xt) * field_on_plane(xt), [Box(lo, hi, splits)], q)
    return float(est)


def neville(xs, ys, at=0.0):
    """Values of the interpolating polynomials through the last ``k`` points, ``k = 1 .. len(xs)``."""
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    out = []
    for k in range(1, len(xs) + 1):
        px, py = xs[-k:], ys[-k:]
        p = list(py)
        for m in range(1, k):
            for i in range(k - m):
                p[i] = ((at - px[i + m]) * p[i] + (px[i] - at) * p[i + 1]) / (px[i] - px[i + m])
        out.append(p[0])
    return out


@dataclass
class TraceReport:
    """Boundary pairings along a decreasing ladder of heights and their extrapolated limit."""

    psi: dict
    ladder: list
    values: list
    limit: float
    error: float
    diverges: bool
    target: float | None = None
    notes: list = field(default_factory=list)

    @property
    def target_error(self):
        if self.target is None:
            return math.nan
        return abs(self.limit - self.target)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "T"])
        for e, v in zip(self.ladder, self.values):
            w.writerow([repr(float(e)), repr(float(v))])
        w.writerow(["limit", repr(float(self.limit))])
        w.writerow(["error", repr(float(self.error))])
        return buf.getvalue()

    def to_dict(self):
        def num(v):
            return None if v is None else (float(v) if math.isfinite(v) else str(v))

        return {
            "psi": self.psi,
            "ladder": [float(e) for e in self.ladder],
            "values": [float(v) for v in self.values],
            "limit": num(self.limit),
            "error": num(self.error),
            "diverges": self.diverges,
            "target": num(self.target),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def lim_trace(u, psi, ladder=DEFAULT_LADDER, q=DEFAULT_SPEC, target=None):
    """Estimate ``lim_{eps -> 0} int psi(x') u(x', eps) dx'``.

    Polynomial extrapolation in ``eps`` through the ladder; the error is the
    gap between the two highest-order extrapolants.  Divergence is flagged
    when ``|T_eps|`` grows monotonically by at least a factor 10 across the
    ladder, and the limit is then reported as ``nan``.

    Returns
    -------
    TraceReport
    """
    if isinstance(psi, TestFunction):
        psi = psi.profile
    ladder = [float(e) for e in ladder]
    if len(ladder) < 2 or any(b >= a for a, b in zip(ladder, ladder[1:])) or ladder[-1] <= 0:
        raise HalfSpaceError("the ladder must be positive and strictly decreasing")
    vals = [boundary_pairing(u, psi, e, q) for e in ladder]
    mags = np.abs(vals)
    growing = bool(np.all(np.diff(mags) > 0))
    diverges = growing and mags[0] > 0 and mags[-1] >= 10 * mags[0]
    if diverges:
        return TraceReport(psi.to_dict(), ladder, vals, math.nan, math.inf, True, target)
    ext = neville(ladder, vals)
    limit = ext[-1]
    err = abs(ext[-1] - ext[-2]) if len(ext) > 1 else math.inf
    return TraceReport(psi.to_dict(), ladder, vals, float(limit), float(err), False, target)


# ---------------------------------------------------------------------------
# the one-dimensional counterexample family


@lru_cache(maxsize=None)
def mollifier_mass():
    """``int_{-1}^{1} exp(-1 / (1 - t^2)) dt``."""
    half = quad(lambda t: math.exp(-1.0 / (1.0 - t * t)), 0.0, 1.0, epsabs=1e-16, epsrel=1e-13)[0]
    return 2.0 * half


def mollifier(t, eps=1.0):
    """Even unit-mass bump ``m_eps(t) = m_1(t / eps) / eps`` supported in ``(-eps, eps)``."""
    t = np.asarray(t, dtype=float) / eps
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2)) / mollifier_mass()
    return out / eps


COUNTEREXAMPLES = ("u", "u+", "v", "v+")


def counterexample_field(which):
    """Fields on the half-plane built from two shifted mollifiers at height ``eps = x_2``.

    ``u = eps^{-1/2} (m_eps(x - eps) - m_eps(x + eps))``, its positive part
    ``u+``, and the unscaled variants ``v``, ``v+``.
    """
    if which not in COUNTEREXAMPLES:
        raise HalfSpaceError(f"unknown counterexample {which!r}; expected one of {COUNTEREXAMPLES}")
    scaled = which.startswith("u")
    positive = which.endswith("+")

    def ev(p):
        x, e = p[:, 0], p[:, 1]
        plus = mollifier((x - e) / e) / e
        minus = 0.0 if positive else mollifier((x + e) / e) / e
        val = plus - minus
        return val / np.sqrt(e) if scaled else val

    def focus(height):
        h = float(height)
        pts = np.array([[h]]) if positive else np.array([[h], [-h]])
        return pts, np.full(pts.shape[0], h)

    return ScalarField(2, ev, provenance="corpus", focus=focus, name=which)


@dataclass
class CounterexampleRow:
    eps: float
    u_pairing: float
    u_bound: float
    u_ok: bool
    uplus_pairing: float
    uplus_bound: float
    uplus_ok: bool | None
    v_pairing: float
    vplus_pairing: float


def counterexample_bounds(psi, ladder=DEFAULT_LADDER, q=DEFAULT_SPEC, small=1e-2):
    """Check ``|T_eps(u)| <= 2 sqrt(eps) |psi'|_inf`` and ``T_eps(u+) >= psi(0) / (4 sqrt(eps))``.

    The lower bound is only asserted for ``eps <= small`` (``uplus_ok`` is
    ``None`` above it).  Pairings of ``v`` and ``v+`` are tabulated as well.

    Returns
    -------
    list of CounterexampleRow
    """
    if isinstance(psi, TestFunction):
        psi = psi.profile
    if psi.ncoord != 1:
        raise HalfSpaceError("the counterexample lives on the half-plane (N = 2)")
    dpsi = psi.max_gradient()
    psi0 = float(psi(np.zeros((1, 1)))[0])
    fields = {k: counterexample_field(k) for k in COUNTEREXAMPLES}
    rows = []
    for e in ladder:
        tu = boundary_pairing(fields["u"], psi, e, q)
        tp = boundary_pairing(fields["u+"], psi, e, q)
        ub = 2.0 * math.sqrt(e) * dpsi
        lb = psi0 / (4.0 * math.sqrt(e))
        rows.append(
            CounterexampleRow(
                eps=float(e),
                u_pairing=tu,
                u_bound=ub,
                u_ok=bool(abs(tu) <= ub),
                uplus_pairing=tp,
                uplus_bound=lb,
                uplus_ok=bool(tp >= lb) if e <= small else None,
                v_pairing=boundary_pairing(fields["v"], psi, e, q),
                vplus_pairing=boundary_pairing(fields["v+"], psi, e, q),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# integration by parts on an interior box


@dataclass
class PartsIdentity:
    boundary: float
    volume: float
    measure: float
    residual: float


def interior_parts_identity(u, mu, lo, hi, phi=None, q=DEFAULT_SPEC, floor=1e-12):
    """Residual of ``int_{dOmega} u d_n phi = int_Omega u Laplace phi + int_Omega phi dmu``.

    Here ``Omega = [lo, hi]`` lies strictly inside the half-space, ``phi``
    vanishes on ``dOmega`` (default: the product of sines) and ``mu`` is the
    measure ``-Laplace u`` restricted to ``Omega``.

    Returns
    -------
    PartsIdentity
        Terms and the relative residual.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    if not lo[-1] > 0 or np.any(hi <= lo):
        raise HalfSpaceError("the box must lie strictly inside the half-space")
    phi = box_test_function(lo, hi) if phi is None else phi
    vol = _volume(u, phi.laplacian, lo, hi, q)
    meas = 0.0
    for loc, w in mu.atoms:
        if np.all(loc > lo) and np.all(loc < hi):
            meas += w * float(phi(loc[None, :])[0])
    meas += _density_pairing(mu, phi, lo, hi, q)
    bnd = 0.0
    for i in range(n):
        keep = [j for j in range(n) if j != i]
        for side, sign in ((lo[i], -1.0), (hi[i], 1.0)):

            def g(t, i=i, side=side, sign=sign, keep=keep):
                pts = np.empty((t.shape[0], n))
                pts[:, keep] = t
                pts[:, i] = side
                return np.asarray(u(pts), dtype=float) * sign * phi.gradient(pts)[:, i]

            est, _ = integrate(g, [Box(lo[keep], hi[keep])], q)
            bnd += float(est)
    scale = max(abs(bnd), abs(vol), abs(meas), floor)
    return PartsIdentity(bnd, vol, meas, abs(bnd - vol - meas) / scale)
