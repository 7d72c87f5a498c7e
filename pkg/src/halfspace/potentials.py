"""
The representation formula

    u(x) = h x_N + int K^x(y') dnu(y') + int G^x(y) dmu(y)

and the two quantities read off from it: the slope ``h`` (an infimum of
``u / x_N``) and the constant in the lower bound
``u - h x_N >= c0 x_N / (1 + |x|^N)``.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np
from scipy.special import ellipe
from scipy.stats import qmc

from .errors import HalfSpaceError, MeasureError
from .fields import ScalarField
from .geometry import CylinderBall, as_points, constants, sphere_area
from .kernels import green_unsafe, poisson
from .measures import BoundaryMeasure, InteriorMeasure, weighted_mass, zero_measure
from .quadrature import DEFAULT_SPEC, Box, integrate, panel_integrate, sphere_bounds, sphere_dirs


def _points(x, dim=None):
    x = as_points(np.asarray(x, dtype=float), dim)
    if np.any(~(x[..., -1] > 0)):
        raise HalfSpaceError("evaluation points must be interior")
    return x


def _scalar_or_array(v, shape):
    v = np.asarray(v, dtype=float).reshape(shape)
    return float(v) if v.ndim == 0 else v


# ---------------------------------------------------------------------------
# Poisson integrals


def poisson_integral(nu, x, q=DEFAULT_SPEC):
    """``int K^x(y') dnu(y')`` at interior points ``x``.

    Atoms are summed exactly.  Densities use, in order of preference,

    * ``N = 2``: the substitution ``y' = x' + x_N tan(theta)``, which maps
      the boundary line onto ``(-pi/2, pi/2)`` with constant Jacobian
      ``C'_2``, on composite Gauss panels that also break at the density's
      support grid;
    * ``N = 3`` and a radial density: closed-form angular integration
      (complete elliptic integral) and composite Gauss panels in the
      radius, graded towards the ring ``|y' - c| = |x' - c|``;
    * otherwise per-point adaptive cubature.

    Parameters
    ----------
    nu : BoundaryMeasure
    x : array_like, shape (..., N)
    q : QuadratureSpec

    Returns
    -------
    float or ndarray
    """
    if not isinstance(nu, BoundaryMeasure):
        raise MeasureError("poisson_integral needs a boundary measure")
    x = _points(x, nu.dim)
    shape = x.shape[:-1]
    flat = x.reshape(-1, nu.dim)
    out = np.zeros(flat.shape[0])
    if flat.shape[0] == 0:
        return out.reshape(shape)
    for loc, w in nu.atoms:
        out += w * poisson(flat, loc)
    for d in nu.densities:
        if d.weight == 0:
            continue
        out += _poisson_density(d, flat, q)
    return _scalar_or_array(out, shape)


def _poisson_density(d, x, q):
    n = x.shape[-1]
    if n == 2:
        return _poisson_line(d, x, q)
    if n == 3 and d.radial:
        return _poisson_radial3(d, x, q)
    return np.array([_poisson_adaptive(d, xi, q) for xi in x])


def _support_grid(d, count_cap=400):
    lo = d.center - d.extent
    hi = d.center + d.extent
    if d.box is not None:
        lo, hi = d.box
    span = float(np.max(hi - lo))
    count = int(min(count_cap, max(4, math.ceil(span / d.scale))))
    return lo, hi, count


def _graded_steps(spacing, height):
    """Offsets ``0, 2^-2, 2^-1, ...`` (in units of the height) until they exceed ``spacing``."""
    jmax = int(min(60, math.ceil(math.log2(spacing / max(height, 1e-300)))))
    if jmax < -2:
        return np.zeros(1)
    return np.concatenate([[0.0], 2.0 ** np.arange(-2, jmax + 1)])


def _grouped(x, spacing, run):
    """Apply ``run(rows, steps)`` to groups of rows sharing a graded-step count."""
    a = x[:, -1]
    j = np.ceil(np.log2(spacing / np.maximum(a, 1e-300))).astype(int)
    out = np.empty(x.shape[0])
    for jj in np.unique(j):
        rows = np.flatnonzero(j == jj)
        out[rows] = run(rows, _graded_steps(spacing, float(np.min(a[rows]))))
    return out


def _poisson_line(d, x, q):
    cp = constants(2).C_prime
    xt = x[:, 0]
    a = x[:, 1]
    if not d.localized:
        half = 0.5 * math.pi
        b = np.broadcast_to(np.linspace(-half, half, 17), (x.shape[0], 17))
        val, _ = panel_integrate(lambda th, rows: cp * d((xt[rows, None] + a[rows, None] * np.tan(th))[..., None]),
                                 b, q)
        return val
    # only the image of the support matters; its grid points become panel ends
    lo, hi, count = _support_grid(d)
    grid = np.linspace(lo[0], hi[0], count + 1)

    def run(rows, steps):
        xr, ar = xt[rows], a[rows]
        near = np.concatenate([xr[:, None] - ar[:, None] * steps, xr[:, None] + ar[:, None] * steps[1:]], axis=1)
        y = np.concatenate([np.broadcast_to(grid, (rows.size, grid.size)), np.clip(near, lo[0], hi[0])], axis=1)
        b = np.sort(np.arctan((y - xr[:, None]) / ar[:, None]), axis=1)

        def f(th, sub):
            yy = xr[sub, None] + ar[sub, None] * np.tan(th)
            return cp * d(yy[..., None])

        return panel_integrate(f, b, q)[0]

    return _grouped(x, grid[1] - grid[0], run)


def _poisson_radial3(d, x, q):
    cp = constants(3).C_prime
    c = d.center
    dist = np.linalg.norm(x[:, :-1] - c, axis=-1)
    a = x[:, -1]
    L = d.extent
    count = int(min(400, max(4, math.ceil(L / d.scale))))
    uni = np.linspace(0.0, L, count + 1)

    def run(rows, steps):
        dr, ar = dist[rows], a[rows]
        graded = np.concatenate([dr[:, None] - ar[:, None] * steps, dr[:, None] + ar[:, None] * steps[1:]], axis=1)
        b = np.concatenate([np.broadcast_to(uni, (rows.size, uni.size)), np.clip(graded, 0.0, L)], axis=1)
        b = np.sort(b, axis=1)

        def f(rho, sub):
            dd = dr[sub, None]
            aa = ar[sub, None]
            # A -/+ B written without cancellation: a^2 + (rho -/+ d)^2
            amb = aa * aa + (rho - dd) ** 2
            apb = aa * aa + (rho + dd) ** 2
            m = 4.0 * dd * rho / apb
            ang = 4.0 * ellipe(m) / (amb * np.sqrt(apb))
            return cp * aa * ang * rho * d.profile(rho)

        return panel_integrate(f, b, q)[0]

    return _grouped(x, uni[1] - uni[0], run)


def _poisson_adaptive(d, x, q):
    """Per-point cubature for any dimension and any density."""
    n = x.size
    cp = constants(n).C_prime
    xt, a = x[:-1], x[-1]
    if d.localized:
        lo, hi = (d.box if d.box is not None else (d.center - d.extent, d.center + d.extent))
        f = lambda p: poisson(x, p) * d(p)
        est, _ = integrate(f, [Box(lo, hi)], q, singular=[xt])
        return float(est)
    # unbounded support: hemisphere substitution y' = x' + a tan(theta) w
    alo, ahi = sphere_bounds(n - 1) if n >= 3 else ([], [])
    lo = np.array([0.0] + alo)
    hi = np.array([0.5 * math.pi] + ahi)

    def g(u):
        th = u[:, 0]
        if n == 2:
            raise AssertionError("handled by the line rule")
        dirs, jac = sphere_dirs(u[:, 1:], n - 1)
        y = xt + (a * np.tan(th))[:, None] * dirs
        return cp * np.sin(th) ** (n - 2) * jac * d(y)

    from .quadrature import cubature_box

    est, _ = cubature_box(g, lo, hi, q)
    return float(est)


# ---------------------------------------------------------------------------
# Green potentials


def green_potential(mu, x, q=DEFAULT_SPEC):
    """``int G^x(y) dmu(y)`` at interior points ``x``.

    Evaluation at an atom returns ``+inf`` (or ``-inf`` for a negative
    atom).  Densities are integrated per point with a polar ball around the
    pole; unbounded densities are truncated where the explicit tail bound
    ``C'_N x_N int_{|y| > R} y_N |f| / (|y| - |x|)^N`` drops below
    ``rel_tol`` times the running estimate.
    """
    if not isinstance(mu, InteriorMeasure):
        raise MeasureError("green_potential needs an interior measure")
    x = _points(x, mu.dim)
    shape = x.shape[:-1]
    flat = x.reshape(-1, mu.dim)
    out = np.zeros(flat.shape[0])
    if flat.shape[0] == 0:
        return out.reshape(shape)
    for loc, w in mu.atoms:
        g = green_unsafe(flat, loc)
        out += np.where(np.isinf(g), math.copysign(math.inf, w), w * g)
    for d in mu.densities:
        if d.weight == 0:
            continue
        vals = np.array([_green_density(d, xi, q) for xi in flat])
        out = out + vals
    return _scalar_or_array(out, shape)


def _green_density(d, x, q, r_max=None):
    n = x.size
    f = lambda p: green_unsafe(x, p) * d(p)
    if d.box is not None or d.localized:
        lo, hi = d.box if d.box is not None else (d.center - d.extent, d.center + d.extent)
        lo = lo.copy()
        lo[-1] = max(lo[-1], 0.0)
        est, _ = integrate(f, [Box(lo, hi)], q, singular=[x])
        return float(est)
    radius = r_max or 8.0 * (1.0 + float(np.linalg.norm(x)))
    while True:
        lo = -radius * np.ones(n)
        hi = radius * np.ones(n)
        lo[-1] = 0.0
        est, _ = integrate(f, [Box(lo, hi)], q, singular=[x])
        tail = _green_tail(d, x, radius)
        if tail <= q.rel_tol * max(abs(est), q.abs_floor) or radius > 1e9:
            return float(est)
        radius *= 2.0


def _green_tail(d, x, radius):
    p = d.decay
    if p is None or math.isinf(p):
        p = 12.0
    n = x.size
    if p <= 1:
        return math.inf
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(256, n)) * 4.0
    pts[:, -1] = np.abs(pts[:, -1])
    c = float(np.max(np.abs(d(pts)) * (1 + np.linalg.norm(pts, axis=-1)) ** p))
    r0 = radius - float(np.linalg.norm(x))
    if r0 <= 0:
        return math.inf
    # C' x_N C (sigma/2) int_R^inf r^{1-N-p} r^{N-1} dr, with |y - x| >= |y| - |x|
    return constants(n).C_prime * x[-1] * c * 0.5 * sphere_area(n) * (radius / r0) ** n * radius ** (1 - p) / (p - 1)


# ---------------------------------------------------------------------------
# the representation formula


@dataclass(frozen=True)
class RepresentationTriple:
    """The data ``(h, nu, mu)`` of a representation formula."""

    h: float
    nu: BoundaryMeasure
    mu: InteriorMeasure

    def __post_init__(self):
        object.__setattr__(self, "h", float(self.h))
        if not isinstance(self.nu, BoundaryMeasure) or not isinstance(self.mu, InteriorMeasure):
            raise MeasureError("nu must be a boundary measure and mu an interior measure")
        if self.nu.dim != self.mu.dim:
            raise MeasureError("nu and mu live in different dimensions")

    @classmethod
    def of(cls, dim, h=0.0, nu=None, mu=None):
        return cls(h, nu if nu is not None else zero_measure(dim, "boundary"),
                   mu if mu is not None else zero_measure(dim, "interior"))

    @property
    def dim(self):
        return self.mu.dim

    @property
    def positive(self):
        return self.nu.is_positive and self.mu.is_positive

    @property
    def trivial(self):
        return self.nu.is_zero and self.mu.is_zero

    def __add__(self, other):
        return RepresentationTriple(self.h + other.h, self.nu + other.nu, self.mu + other.mu)

    def check_admissible(self, q=DEFAULT_SPEC, radii=(1.0, 8.0, 64.0)):
        """Weighted mass ``int x_N d|mu|`` is finite on sampled cylinders."""
        centre = np.zeros(self.dim)
        centre[-1] = 1.0
        masses = [weighted_mass(self.mu, CylinderBall(centre, r), q) for r in radii]
        if not all(math.isfinite(m) for m in masses):
            raise MeasureError("mu is not locally finite with weight x_N")
        return masses


def represent(t, q=DEFAULT_SPEC):
    """The field ``x -> h x_N + int K^x dnu + int G^x dmu``.

    The result carries two parts: the smooth ``h x_N + int K^x dnu`` and the
    Green potential, whose singular points are the atoms of ``mu``.
    """
    nu, mu, h = t.nu, t.mu, t.h
    n = t.dim

    def smooth(p):
        out = h * p[:, -1]
        if not nu.is_zero:
            out = out + poisson_integral(nu, p, q)
        return out

    def singular(p):
        return green_potential(mu, p, q)

    def ev(p):
        out = smooth(p)
        if not mu.is_zero:
            out = out + singular(p)
        return out

    focus = None
    if len(nu.weights):
        locs = nu.locs.copy()

        def focus(height):
            return locs, np.full(locs.shape[0], float(height))

    parts = [ScalarField(n, smooth, declared_h=h, provenance="assembled", focus=focus, name="h x_N + P[nu]")]
    if not mu.is_zero:
        parts.append(ScalarField(n, singular, declared_h=0.0, provenance="assembled", singular_points=mu.locs,
                                 name="G[mu]"))
    return ScalarField(n, ev, declared_h=h, provenance="assembled", singular_points=mu.locs,
                       focus=focus, name="represent", parts=parts)


# ---------------------------------------------------------------------------
# slope and lower bound


def _halton(dim, count, seed):
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(count)


def nested_box_cloud(dim, levels, per_level=256, seed=0):
    """Low-discrepancy points in ``B*_{2^k}(e_N)``, ``k = 0 .. levels``.

    Returns a list with one ``(per_level, dim)`` array per level.
    """
    out = []
    u = _halton(dim, per_level * (levels + 1), seed)
    for k in range(levels + 1):
        r = 2.0**k
        blk = u[k * per_level : (k + 1) * per_level]
        p = np.empty_like(blk)
        p[:, :-1] = (2 * blk[:, :-1] - 1) * r
        lo = max(0.0, 1.0 - r)
        p[:, -1] = lo + blk[:, -1] * (1.0 + r - lo)
        p[:, -1] = np.maximum(p[:, -1], 1e-12 * r)
        out.append(p)
    return out


def estimate_h(u, box_levels=10, q=DEFAULT_SPEC, per_level=256, refine_steps=4):
    """Estimate ``h = inf u(x) / x_N`` from nested dyadic sample clouds.

    Each level adds a low-discrepancy cloud in ``B*_{2^k}(e_N)`` and then
    samples shrinking boxes around the running minimizer.

    Returns
    -------
    float
        The smallest ratio found, or ``-inf`` if ``u`` returned ``-inf``.
    """
    n = u.dim
    rng = np.random.default_rng(q.seed)
    best = math.inf
    best_pt = None
    for pts in nested_box_cloud(n, box_levels, per_level, q.seed):
        vals = np.asarray(u(pts))
        if np.any(vals == -math.inf):
            return -math.inf
        ratio = vals / pts[:, -1]
        ratio = np.where(np.isnan(ratio), math.inf, ratio)
        i = int(np.argmin(ratio))
        if ratio[i] < best:
            best, best_pt = float(ratio[i]), pts[i]
        for s in range(refine_steps):
            if best_pt is None:
                break
            half = 0.5 ** (s + 1) * max(best_pt[-1], 1.0)
            cand = best_pt + rng.uniform(-half, half, size=(64, n))
            cand[:, -1] = np.abs(cand[:, -1]) + 1e-12
            vals = np.asarray(u(cand))
            if np.any(vals == -math.inf):
                return -math.inf
            ratio = vals / cand[:, -1]
            ratio = np.where(np.isnan(ratio), math.inf, ratio)
            i = int(np.argmin(ratio))
            if ratio[i] < best:
                best, best_pt = float(ratio[i]), cand[i]
    return best


class LowerBoundResult(NamedTuple):
    c0: float
    holds: bool
    degenerate: bool


def lower_bound_check(u, t, grid=None, q=DEFAULT_SPEC):
    """Empirical constant ``c0 = min (u - h x_N)(1 + |x|^N) / x_N`` over ``grid``.

    Parameters
    ----------
    u : ScalarField
    t : RepresentationTriple
    grid : array_like, shape (M, N), optional
        Defaults to nested low-discrepancy clouds up to ``|x| ~ 64``.

    Returns
    -------
    LowerBoundResult
        ``degenerate`` is set (and ``holds`` is False) when ``u`` coincides
        with ``h x_N`` on the grid.
    """
    n = u.dim
    if grid is None:
        grid = np.vstack(nested_box_cloud(n, 6, 256, q.seed))
    grid = _points(grid, n)
    excess = np.asarray(u(grid)) - t.h * grid[:, -1]
    if t.trivial or np.all(excess == 0):
        return LowerBoundResult(0.0, False, True)
    ratio = excess * (1 + np.linalg.norm(grid, axis=-1) ** n) / grid[:, -1]
    ratio = ratio[~np.isnan(ratio)]
    c0 = float(np.min(ratio))
    return LowerBoundResult(c0, bool(c0 > 0), False)
