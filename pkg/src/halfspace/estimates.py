"""
Explicit pointwise bounds for the regularized Green and Poisson kernels, and
a seeded audit that checks them on random point pairs.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import check_dim, constants
from .kernels import aux_a, green, grad_green, grad_green_sq, poisson


def green_upper(x, y, eps=0.0):
    """``C'_N x_N y_N / a2^{N/2}``, an upper bound for ``G^x_eps(y)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.shape[-1]
    _, a2 = aux_a(x, y, eps)
    return constants(n).C_prime * x[..., -1] * y[..., -1] * a2 ** (-n / 2.0)


def dn_green_upper(x, y, eps=0.0):
    """Two nested upper bounds for ``|d G / d y_N|``.

    Returns
    -------
    fine, coarse : ndarray
        ``(C'/2) x_N a2^{-N/2} [1 + (a2/a1)^{N/2} + 2N y_N^2/a1]`` and
        ``(N+1) C' x_N a2^{-N/2}``.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.shape[-1]
    cp = constants(n).C_prime
    a1, a2 = aux_a(x, y, eps)
    xn, yn = x[..., -1], y[..., -1]
    base = xn * a2 ** (-n / 2.0)
    fine = 0.5 * cp * base * (1 + (a2 / a1) ** (n / 2.0) + 2 * n * yn**2 / a1)
    return fine, (n + 1) * cp * base


def grad_sq_upper(x, y, eps=0.0):
    """Two nested upper bounds for ``|grad G|^2`` (fine, coarse)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.shape[-1]
    cp = constants(n).C_prime
    a1, a2 = aux_a(x, y, eps)
    xn, yn = x[..., -1], y[..., -1]
    dt2 = np.sum((x[..., :-1] - y[..., :-1]) ** 2, axis=-1)
    base = xn**2 * a2 ** (-float(n))
    inner = (1 + (a2 / a1) ** (n / 2.0) + 2 * n * yn**2 / a1) ** 2 + 4 * n**2 * yn**2 * dt2 / a1**2
    fine = (0.5 * cp) ** 2 * base * inner
    coarse = cp**2 * base * ((1 + n) ** 2 + n**2)
    return fine, coarse


def grad_sq_lower(x, y, eps=0.0):
    """The claimed lower bound ``(C'_N/2)^2 x_N^2 / a2^N`` for ``|grad G|^2``.

    This bound does not hold everywhere; see :func:`audit`, which counts the
    pairs where it fails.
    """
    x = np.asarray(x, float)
    n = x.shape[-1]
    _, a2 = aux_a(x, y, eps)
    return (0.5 * constants(n).C_prime) ** 2 * x[..., -1] ** 2 * a2 ** (-float(n))


def sample_pairs(dim, samples, seed):
    """Seeded random ``(x, y, eps)`` triples with a wide spread of scales."""
    rng = np.random.default_rng(seed)
    n = check_dim(dim)

    def pts():
        t = rng.uniform(-3, 3, size=(samples, n - 1))
        h = 10.0 ** rng.uniform(-2, 1, size=(samples, 1))
        return np.hstack([t, h])

    x = pts()
    y = pts()
    # a quarter of the pairs are placed close together
    m = samples // 4
    y[:m] = x[:m] + rng.normal(size=(m, n)) * 10.0 ** rng.uniform(-2, 0, size=(m, 1))
    y[:m, -1] = np.abs(y[:m, -1])
    eps = rng.uniform(0, 1, size=samples) ** 2
    eps[: samples // 3] = 0.0
    return x, y, eps


@dataclass
class AuditReport:
    """Violation counts per check.

    ``worst`` holds, per check, the worst observed ratio (or relative error
    for the tolerance checks); a bound holds when its ratio is ``<= 1``.
    """

    dim: int
    samples: int
    seed: int
    violations: dict = field(default_factory=dict)
    worst: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(v == 0 for v in self.violations.values())

    def rows(self):
        return [
            {"dim": self.dim, "check": k, "violations": self.violations[k], "worst": self.worst[k]}
            for k in self.violations
        ]


def _fd_gradient(x, y, eps, rel_step=1e-4):
    # central differences; the step scales with the distance to the pole
    n = x.shape[-1]
    h = rel_step * np.sqrt(eps**2 + np.sum((x - y) ** 2, axis=-1))
    g = np.empty_like(y)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        yp = y + h[:, None] * e
        ym = y - h[:, None] * e
        g[:, j] = (green(x, yp, eps) - green(x, ym, eps)) / (2 * h)
    return g


def audit(dim, samples=1000, seed=0, rel_tol=1e-12, fd_tol=1e-6):
    """Check symmetry, monotonicity in ``eps`` and every explicit bound.

    Parameters
    ----------
    dim : int
    samples : int
    seed : int
    rel_tol : float
        Slack allowed for floating-point rounding in exact inequalities.
    fd_tol : float
        Relative tolerance for the analytic gradient against central
        differences.

    Returns
    -------
    AuditReport
    """
    n = check_dim(dim)
    x, y, eps = sample_pairs(n, samples, seed)
    rng = np.random.default_rng(seed + 1)
    rep = AuditReport(n, samples, seed)

    def record(name, ratio, limit=1.0):
        ratio = np.asarray(ratio, dtype=float)
        rep.violations[name] = int(np.sum(~(ratio <= limit)))
        rep.worst[name] = float(np.max(ratio))

    g = green(x, y, eps)
    gs = green(y, x, eps)
    record("symmetry", np.abs(g - gs) / np.maximum(np.abs(g), 1e-300), rel_tol)
    record("nonnegative", -g, 0.0)

    eps2 = eps + rng.uniform(0, 1, samples) * (1 - eps) * 0.999
    g2 = green(x, y, eps2)
    record("monotone_eps", (g2 - g) / np.maximum(g, 1e-300), rel_tol)

    record("green_upper", g / green_upper(x, y, eps), 1 + rel_tol)

    dn = np.abs(grad_green(x, y, eps)[:, -1])
    fine, coarse = dn_green_upper(x, y, eps)
    record("dn_green_upper", dn / fine, 1 + rel_tol)
    record("dn_green_upper_coarse", dn / coarse, 1 + rel_tol)

    gsq = grad_green_sq(x, y, eps)
    fine, coarse = grad_sq_upper(x, y, eps)
    record("grad_sq_upper", gsq / fine, 1 + rel_tol)
    record("grad_sq_upper_coarse", gsq / coarse, 1 + rel_tol)
    record("grad_sq_lower", grad_sq_lower(x, y, eps) / gsq, 1 + rel_tol)

    ga = grad_green(x, y, eps)
    gf = _fd_gradient(x, y, eps)
    err = np.linalg.norm(ga - gf, axis=-1) / np.linalg.norm(ga, axis=-1)
    record("gradient_fd", err, fd_tol)

    # Poisson kernel as the boundary normal derivative of G
    xp = x.copy()
    bp = np.hstack([y[:, :-1], np.zeros((samples, 1))])
    k = poisson(xp, y[:, :-1], eps)
    dnb = grad_green(xp, bp, eps)[:, -1]
    record("poisson_is_normal_derivative", np.abs(dnb - k) / k, 1e-12)
    return rep


def asymptotic_errors(dim, x, radii, eps=0.0, direction=None):
    """Relative errors of ``G |y|^N / y_N`` and ``K |y'|^N`` against ``C'_N x_N``.

    Parameters
    ----------
    dim : int
    x : array_like, shape (N,)
    radii : sequence of float
        Values of ``|y|`` (and ``|y'|``) to probe.
    eps : float
    direction : array_like, optional
        Unit direction with positive last component; defaults to a fixed
        oblique direction.

    Returns
    -------
    green_err, poisson_err : ndarray
    """
    n = check_dim(dim)
    x = np.asarray(x, float)
    cp = constants(n).C_prime
    if direction is None:
        direction = np.ones(n) / np.sqrt(n)
    direction = np.asarray(direction, float) / np.linalg.norm(direction)
    radii = np.asarray(radii, float)
    y = radii[:, None] * direction
    g = green(x, y, eps) * radii**n / y[:, -1]
    tdir = direction[:-1] / np.linalg.norm(direction[:-1])
    yp = radii[:, None] * tdir
    k = poisson(x, yp, eps) * radii**n
    target = cp * x[-1]
    return np.abs(g - target) / target, np.abs(k - target) / target
