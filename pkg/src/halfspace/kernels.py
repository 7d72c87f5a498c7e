"""
Kernels of the Dirichlet Laplacian on the half-space.

All functions broadcast over leading axes; points carry their coordinates on
the last axis.  ``eps`` is the regularization parameter (``0 <= eps < 1``);
``eps = 0`` gives the classical kernels.

The Green function is evaluated as

    G = (C_2 / 2) log1p(d / a2)                          (N = 2)
    G = C_N a2^{-k} (1 - (1 + d / a2)^{-k}),  k = (N-2)/2  (N >= 3)

with ``a2 = eps^2 + |x - y|^2`` and ``d = 4 x_N y_N = a1 - a2``.  Both forms
are exact rewrites of ``Gamma^x - Gamma^{x_hat}`` that never subtract two
nearly equal numbers, so the value is accurate up to the boundary and is
bit-for-bit symmetric in ``(x, y)``.
"""

import numpy as np

from .errors import CoincidentPointsError, HalfSpaceError
from .geometry import as_points, constants, mirror


def _check_eps(eps):
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0) or np.any(eps >= 1) or np.any(~np.isfinite(eps)):
        raise HalfSpaceError("regularization eps must satisfy 0 <= eps < 1")
    return eps


def _pair(x, y):
    x = as_points(x)
    y = as_points(y, x.shape[-1])
    return x, y, x.shape[-1]


def _sqdist(x, y):
    return np.sum((x - y) ** 2, axis=-1)


def _no_coincidence(a2, eps):
    if np.any(a2 == 0):
        raise CoincidentPointsError("kernel evaluated at coincident points with eps = 0")


def aux_a(x, y, eps=0.0):
    """Auxiliary quantities ``a1 = eps^2 + |x_hat - y|^2`` and ``a2 = eps^2 + |x - y|^2``.

    Returns
    -------
    a1, a2 : ndarray
    """
    x, y, _ = _pair(x, y)
    e2 = _check_eps(eps) ** 2
    a2 = e2 + _sqdist(x, y)
    a1 = e2 + _sqdist(mirror(x), y)
    return a1, a2


def fundamental(x, y, eps=0.0):
    """Regularized fundamental solution of ``-Laplace`` centered at ``x``."""
    x, y, n = _pair(x, y)
    eps = _check_eps(eps)
    a2 = eps**2 + _sqdist(x, y)
    _no_coincidence(a2, eps)
    c = constants(n)
    if n == 2:
        return -0.5 * c.C * np.log(a2)
    return c.C * a2 ** (-(n - 2) / 2.0)


def green(x, y, eps=0.0):
    """Regularized Green function ``G^x_eps(y)`` of the half-space.

    Nonnegative for ``x_N, y_N >= 0``, symmetric in ``(x, y)`` and zero when
    either point lies on the boundary.

    Raises
    ------
    CoincidentPointsError
        If ``eps == 0`` and ``x == y`` for some pair.
    """
    x, y, n = _pair(x, y)
    eps = _check_eps(eps)
    a2 = eps**2 + _sqdist(x, y)
    _no_coincidence(a2, eps)
    d = 4.0 * (x[..., -1] * y[..., -1])
    c = constants(n)
    t = np.log1p(d / a2)
    if n == 2:
        return 0.5 * c.C * t
    k = (n - 2) / 2.0
    return c.C * a2 ** (-k) * -np.expm1(-k * t)


def green_unsafe(x, y, eps=0.0):
    """Green function without the coincidence check (``+inf`` at the pole).

    Intended for quadrature integrands that may land on the pole with zero
    weight.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    a2 = eps * eps + _sqdist(x, y)
    d = 4.0 * (x[..., -1] * y[..., -1])
    c = constants(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.log1p(d / a2)
        if n == 2:
            g = 0.5 * c.C * t
        else:
            k = (n - 2) / 2.0
            g = c.C * a2 ** (-k) * -np.expm1(-k * t)
    return np.where(a2 == 0, np.inf, g)


def poisson(x, yprime, eps=0.0):
    """Regularized Poisson kernel ``C'_N x_N (eps^2 + x_N^2 + |x' - y'|^2)^{-N/2}``.

    Parameters
    ----------
    x : array_like, shape (..., N)
        Interior points.
    yprime : array_like, shape (..., N-1)
        Boundary points.
    """
    x = as_points(x)
    n = x.shape[-1]
    yprime = np.asarray(yprime, dtype=float)
    if yprime.shape[-1] != n - 1:
        raise HalfSpaceError(f"boundary points must have {n - 1} coordinates")
    eps = _check_eps(eps)
    xn = x[..., -1]
    if np.any(~(xn > 0)):
        raise HalfSpaceError("poisson kernel needs interior x")
    r2 = eps**2 + xn**2 + np.sum((x[..., :-1] - yprime) ** 2, axis=-1)
    return constants(n).C_prime * xn * r2 ** (-n / 2.0)


def grad_green(x, y, eps=0.0):
    """Gradient of ``y -> G^x_eps(y)``.

    ``(C'_N / 2) [(y - x_hat) a1^{-N/2} - (y - x) a2^{-N/2}]``; the last
    component is the normal derivative.
    """
    x, y, n = _pair(x, y)
    eps = _check_eps(eps)
    e2 = eps**2
    a2 = e2 + _sqdist(x, y)
    _no_coincidence(a2, eps)
    xh = mirror(x)
    a1 = e2 + _sqdist(xh, y)
    half = 0.5 * constants(n).C_prime
    p1 = (a1 ** (-n / 2.0))[..., None]
    p2 = (a2 ** (-n / 2.0))[..., None]
    return half * ((y - xh) * p1 - (y - x) * p2)


def grad_green_sq(x, y, eps=0.0):
    """``|grad_y G^x_eps|^2`` from the split tangential/normal expression."""
    x, y, n = _pair(x, y)
    a1, a2 = aux_a(x, y, eps)
    _no_coincidence(a2, eps)
    p1 = a1 ** (-n / 2.0)
    p2 = a2 ** (-n / 2.0)
    tang = (p1 - p2) ** 2 * _sqdist(x[..., :-1], y[..., :-1])
    xn, yn = x[..., -1], y[..., -1]
    norm = ((yn + xn) * p1 - (yn - xn) * p2) ** 2
    return (0.5 * constants(n).C_prime) ** 2 * (tang + norm)


def in_level_ring(x, y, R):
    """Membership of ``y`` in the Green level sets around ``x``.

    Returns
    -------
    in_R, in_2R, in_ring : ndarray of bool
        ``G^x(y) > 1/R``, ``G^x(y) > 1/(2R)`` and the ring between them.
    """
    if not R > 0:
        raise HalfSpaceError("R must be positive")
    g = green(x, y)
    in_r = g > 1.0 / R
    in_2r = g > 1.0 / (2.0 * R)
    return in_r, in_2r, in_2r & ~in_r
