"""
Ring integrals and their dyadic scans.

Four families of annular averages are provided:

* the weighted cylindrical ring ``I(R) = R^{-(N+2)} int y_N |u - h y_N|``
  over ``R < |x - y|_* < 2R`` (and the same integrand over the full
  cylinder ``B*_R(x)``);
* the classical Euclidean ring ``R^{-N} int |u - l|`` over
  ``R < |x - y| < 2R`` with ``u`` extended by zero to the lower half-space;
* level-set rings ``{1/(2R) < G^x < 1/R}`` weighted by
  ``|grad G^x|^2 / G^x / ln 2`` (which integrates to one over every ring),
  or by ``R |x - y|^{-2N}``.

A liminf cannot be computed, so :func:`scan` evaluates the integral on a
dyadic grid of radii and issues a three-valued verdict from the minimum and
the trailing log-log slope.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np

from .errors import HalfSpaceError, QuadratureError
from .geometry import constants
from .kernels import grad_green, green_unsafe
from .quadrature import DEFAULT_SPEC, RayShell, cyl_shell_regions, integrate

TAGS = ("(R)", "(R+)", "(R+0)", "ball-limit", "green-ring", "ring-equivalent")
LN2 = math.log(2.0)


def _centre(x, dim=None):
    x = np.asarray(x, dtype=float).reshape(-1)
    if dim is not None and x.size != dim:
        raise HalfSpaceError(f"center must have {dim} coordinates")
    if not x[-1] > 0:
        raise HalfSpaceError("center must be interior")
    return x


def _check_radius(R):
    R = float(R)
    if not R > 0:
        raise HalfSpaceError("R must be positive")
    return R


def _weighted_integrand(u, h):
    def f(y):
        v = np.asarray(u(y), dtype=float)
        return y[:, -1] * np.abs(v - h * y[:, -1])

    return f


def _cyl_regions(x, rho0, rho1, h0, h1):
    # geometric heights resolve features near the boundary plane in wide rings
    h0 = max(h0, 0.0)
    breaks = x[-1] * 2.0 ** np.arange(-4, 64)
    breaks = breaks[(breaks > h0) & (breaks < h1)]
    return cyl_shell_regions(x[:-1], rho0, rho1, h0, h1, breaks)


def ring_plus_integral(u, h, x, R, q=DEFAULT_SPEC):
    """``R^{-(N+2)} int y_N |u(y) - h y_N| dy`` over ``{y_N > 0, R < |x - y|_* < 2R}``.

    The cylindrical annulus is split into an outer shell and the caps above
    and below the inner cylinder.

    Parameters
    ----------
    u : ScalarField
    h : float
    x : array_like, shape (N,)
    R : float
    q : QuadratureSpec
    """
    x = _centre(x, u.dim)
    R = _check_radius(R)
    a = x[-1]
    regions = _cyl_regions(x, R, 2 * R, a - 2 * R, a + 2 * R)
    regions += _cyl_regions(x, 0.0, R, a + R, a + 2 * R)
    if a - R > 0:
        regions += _cyl_regions(x, 0.0, R, a - 2 * R, a - R)
    est, _ = integrate(_weighted_integrand(u, h), regions, q, singular=u.singular_points)
    return float(est) / R ** (u.dim + 2)


def ball_limit_integral(u, h, x, R, q=DEFAULT_SPEC):
    """The integrand of :func:`ring_plus_integral` over the full cylinder ``B*_R(x)``."""
    x = _centre(x, u.dim)
    R = _check_radius(R)
    a = x[-1]
    regions = _cyl_regions(x, 0.0, R, a - R, a + R)
    est, _ = integrate(_weighted_integrand(u, h), regions, q, singular=u.singular_points)
    return float(est) / R ** (u.dim + 2)


def classical_ring_integral(u, l, x, R, q=DEFAULT_SPEC):
    """``R^{-N} int_{R < |x - y| < 2R} |u - l| dy`` with ``u = 0`` for ``y_N <= 0``."""
    x = _centre(x, u.dim)
    R = _check_radius(R)
    l = float(l)
    n = u.dim

    a = x[-1]

    def cross(d):
        # distance along each direction to the plane y_N = 0, clipped to the shell
        r = np.full(d.shape[0], 2 * R)
        down = d[:, -1] < 0
        r[down] = np.clip(a / -d[down, -1], R, 2 * R)
        return r

    breaks = (-a / R, -a / (2 * R))
    upper = RayShell(x, lambda d: np.full(d.shape[0], R), cross, height_breaks=breaks)
    lower = RayShell(x, cross, lambda d: np.full(d.shape[0], 2 * R), height_breaks=breaks)
    est, _ = integrate(lambda y: np.abs(np.asarray(u(y), dtype=float) - l), [upper], q,
                       singular=[p for p in u.singular_points if R < np.linalg.norm(p - x) < 2 * R])
    if l != 0:
        below, _ = integrate(lambda y: np.full(y.shape[0], abs(l)), [lower], q)
        est += below
    return float(est) / R**n


# ---------------------------------------------------------------------------
# level-set rings


def level_radius(x, dirs, level, iters=60):
    """Distance from ``x`` along unit directions to the level set ``G^x = level``.

    ``G^x`` decreases strictly along every ray from its pole, so the root is
    bracketed between a tiny radius and an explicit radius beyond which the
    upper bound ``G^x(y) <= C'_N x_N y_N / |x - y|^N`` is below ``level``.

    Parameters
    ----------
    x : ndarray, shape (N,)
    dirs : ndarray, shape (M, N)
    level : float

    Returns
    -------
    ndarray, shape (M,)
    """
    n = x.size
    a = x[-1]
    cp = constants(n).C_prime
    r_far = 2.0 * max(a, (2 * cp * a * a / level) ** (1.0 / n), (2 * cp * a / level) ** (1.0 / (n - 1)))
    hi = np.full(dirs.shape[0], r_far)
    down = dirs[:, -1] < 0
    hi[down] = np.minimum(hi[down], a / -dirs[down, -1])
    lo = np.full(dirs.shape[0], 1e-14 * r_far)
    llo, lhi = np.log(lo), np.log(hi)
    for _ in range(iters):
        mid = 0.5 * (llo + lhi)
        g = green_unsafe(x, x + np.exp(mid)[:, None] * dirs)
        above = g > level
        llo = np.where(above, mid, llo)
        lhi = np.where(above, lhi, mid)
    return np.exp(0.5 * (llo + lhi))


def _level_shell(x, R, weight=None):
    return RayShell(
        x,
        lambda d: level_radius(x, d, 1.0 / R),
        lambda d: level_radius(x, d, 0.5 / R),
        weight=weight,
    )


def green_ring_integral(u, x, R, q=DEFAULT_SPEC):
    """``(1/ln 2) int_{1/(2R) < G^x < 1/R} |grad G^x|^2 / G^x * u dy``.

    For a harmonic ``u`` this is ``u(x)`` up to a term that vanishes as
    ``R`` grows; for ``u = 1`` it is exactly one.
    """
    x = _centre(x, u.dim)
    R = _check_radius(R)

    def f(y):
        g = green_unsafe(x, y)
        dg = grad_green(x, y)
        w = np.sum(dg * dg, axis=-1) / g
        return w * np.asarray(u(y), dtype=float) / LN2

    est, _ = integrate(f, [_level_shell(x, R)], q)
    return float(est)


def ring_equivalent_integral(u, l, x, R, q=DEFAULT_SPEC):
    """``R int_{1/(2R) < G^x < 1/R} |x - y|^{-2N} |u - l| dy``."""
    x = _centre(x, u.dim)
    R = _check_radius(R)
    n = u.dim
    l = float(l)

    def f(y):
        r = np.linalg.norm(y - x, axis=-1)
        return R * r ** (-2 * n) * np.abs(np.asarray(u(y), dtype=float) - l)

    est, _ = integrate(f, [_level_shell(x, R)], q)
    return float(est)


def green_ring_weight_integral(x, R, q=DEFAULT_SPEC):
    """Integral of the normalized weight over the level ring (exactly one)."""
    n = np.asarray(x).size
    from .fields import ScalarField

    one = ScalarField(n, lambda p: np.ones(p.shape[0]), provenance="user", name="1")
    return green_ring_integral(one, x, R, q)


# ---------------------------------------------------------------------------
# scans


@dataclass
class RingScanReport:
    """Dyadic scan of a ring integral with a three-valued verdict.

    Attributes
    ----------
    condition : str
    center : tuple
    h : float
        Slope (or level ``l``) subtracted from ``u``.
    radii, values : list of float
    slope : float
        Least-squares log-log slope over the trailing window (``nan`` when
        fewer than four trailing values are finite and positive, ``-inf``
        when the trailing values reach exactly zero).
    min_value : float
    verdict : str
        ``satisfied``, ``not-satisfied`` or ``inconclusive``.
    verdict_tol : float
    notes : list of str
    """

    condition: str
    center: tuple
    h: float
    radii: list
    values: list
    slope: float
    min_value: float
    verdict: str
    verdict_tol: float
    notes: list = field(default_factory=list)

    @property
    def cumulative_min(self):
        out, m = [], math.inf
        for v in self.values:
            if math.isfinite(v):
                m = min(m, v)
            out.append(m)
        return out

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "R", "I", "cumulative_min", "slope"])
        for k, (R, v, m) in enumerate(zip(self.radii, self.values, self.cumulative_min)):
            w.writerow([k, repr(float(R)), repr(float(v)), repr(float(m)), repr(float(self.slope))])
        return buf.getvalue()

    def to_dict(self):
        def num(v):
            v = float(v)
            return v if math.isfinite(v) else str(v)

        return {
            "condition": self.condition,
            "center": [float(c) for c in self.center],
            "h": float(self.h),
            "radii": [float(r) for r in self.radii],
            "values": [num(v) for v in self.values],
            "slope": num(self.slope),
            "min_value": num(self.min_value),
            "verdict": self.verdict,
            "verdict_tol": float(self.verdict_tol),
            "notes": list(self.notes),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def default_r0(x):
    """Smallest scan radius, ``max(4, 5 x_N / 2)``."""
    return max(4.0, 2.5 * float(np.asarray(x).reshape(-1)[-1]))


def field_scale(u, x):
    """Magnitude of ``u`` near ``x`` used to make verdict thresholds relative."""
    x = np.asarray(x, dtype=float).reshape(-1)
    probes = [x, x + np.eye(x.size)[-1] * 0.5 * x[-1], x + np.eye(x.size)[-1] * x[-1]]
    for p in probes:
        try:
            v = abs(float(u(p)))
        except (QuadratureError, HalfSpaceError):
            continue
        if math.isfinite(v) and v > 0:
            return v
    return 1.0


def trailing_slope(radii, values, window=4):
    """Log-log slope over the last ``window`` values.

    Returns ``-inf`` when a trailing value is exactly zero and ``nan`` when
    any trailing value is not finite or negative.
    """
    r = np.asarray(radii[-window:], dtype=float)
    v = np.asarray(values[-window:], dtype=float)
    if len(v) < window or not np.all(np.isfinite(v)) or np.any(v < 0):
        return math.nan
    if np.any(v == 0):
        return -math.inf
    return float(np.polyfit(np.log(r), np.log(v), 1)[0])


def verdict_from(values, slope, tol):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return "inconclusive"
    vmin = min(finite)
    if all(v == 0 for v in values):
        return "satisfied"
    if math.isnan(slope):
        return "inconclusive"
    if vmin <= tol and slope < -0.25:
        return "satisfied"
    if vmin >= 10 * tol and slope >= -0.05:
        return "not-satisfied"
    return "inconclusive"


def ring_value(u, h_or_l, x, condition, R, q=DEFAULT_SPEC):
    """Dispatch one ring integral by condition tag."""
    if condition == "(R+)":
        return ring_plus_integral(u, h_or_l, x, R, q)
    if condition == "(R+0)":
        return ring_plus_integral(u, 0.0, x, R, q)
    if condition == "ball-limit":
        return ball_limit_integral(u, h_or_l, x, R, q)
    if condition == "(R)":
        return classical_ring_integral(u, h_or_l, x, R, q)
    if condition == "green-ring":
        return green_ring_integral(u, x, R, q)
    if condition == "ring-equivalent":
        return ring_equivalent_integral(u, h_or_l, x, R, q)
    raise HalfSpaceError(f"unknown condition {condition!r}; expected one of {TAGS}")


def scan(u, h_or_l, x, condition="(R+)", R0=None, levels=8, q=DEFAULT_SPEC, rel_verdict_tol=1e-4):
    """Evaluate a ring integral at ``R_k = R0 2^k`` and judge its liminf.

    The verdict is ``satisfied`` when the minimum is at most ``verdict_tol``
    and the trailing slope is below ``-0.25``, ``not-satisfied`` when the
    minimum is at least ``10 verdict_tol`` and the slope is at least
    ``-0.05``, and ``inconclusive`` otherwise.  ``verdict_tol`` is
    ``rel_verdict_tol`` times :func:`field_scale` at ``x``.  Quadrature
    failures become ``nan`` entries.

    Returns
    -------
    RingScanReport
    """
    if condition not in TAGS:
        raise HalfSpaceError(f"unknown condition {condition!r}; expected one of {TAGS}")
    if levels < 4:
        raise HalfSpaceError("a scan needs at least 4 levels")
    x = _centre(x, u.dim)
    R0 = default_r0(x) if R0 is None else _check_radius(R0)
    radii = [R0 * 2.0**k for k in range(levels)]
    values, notes = [], []
    for R in radii:
        try:
            values.append(ring_value(u, h_or_l, x, condition, R, q))
        except QuadratureError as exc:
            values.append(math.nan)
            notes.append(f"R={R:g}: {exc}")
    slope = trailing_slope(radii, values)
    tol = rel_verdict_tol * field_scale(u, x)
    finite = [v for v in values if math.isfinite(v)]
    h = 0.0 if condition == "(R+0)" else float(h_or_l)
    return RingScanReport(
        condition=condition,
        center=tuple(float(c) for c in x),
        h=h,
        radii=radii,
        values=values,
        slope=slope,
        min_value=min(finite) if finite else math.nan,
        verdict=verdict_from(values, slope, tol),
        verdict_tol=tol,
        notes=notes,
    )
