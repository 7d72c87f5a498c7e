"""
Geometry of the upper half-space ``R^{N-1} x (0, inf)``.

Points are stored as numpy arrays whose last axis has length ``N``; the
final coordinate is the height above the boundary hyperplane.  The helpers
here never copy more than they need to and broadcast over leading axes.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .errors import HalfSpaceError

MAX_DIM = 8


def check_dim(dim):
    """Validate a half-space dimension and return it as ``int``."""
    if int(dim) != dim or not 2 <= dim <= MAX_DIM:
        raise HalfSpaceError(f"dimension must be an integer in [2, {MAX_DIM}], got {dim}")
    return int(dim)


def gamma_half(n):
    """Gamma(n/2) for a positive integer ``n`` by the half-integer recurrence."""
    if n < 1:
        raise ValueError("n must be positive")
    if n % 2 == 0:
        value, k = 1.0, 2
    else:
        value, k = math.sqrt(math.pi), 1
    # Gamma(s + 1) = s Gamma(s)
    while k < n:
        value *= k / 2.0
        k += 2
    return value


@dataclass(frozen=True)
class Constants:
    """Dimensional constants of the Laplacian in ``R^N``.

    Attributes
    ----------
    dim : int
    sigma : float
        Surface measure of the unit sphere ``S^{N-1}``.
    C : float
        Normalization of the fundamental solution,
        ``1 / (sigma * max(N - 2, 1))``.
    C_prime : float
        Normalization of the Poisson kernel, ``2 / sigma``.
    """

    dim: int
    sigma: float
    C: float
    C_prime: float


@lru_cache(maxsize=None)
def constants(dim) -> Constants:
    dim = check_dim(dim)
    sigma = 2.0 * math.pi ** (dim / 2.0) / gamma_half(dim)
    return Constants(dim, sigma, 1.0 / (sigma * max(dim - 2, 1)), 2.0 / sigma)


def sphere_area(dim):
    """Surface measure of the unit sphere in ``R^dim`` (any ``dim >= 1``)."""
    return 2.0 * math.pi ** (dim / 2.0) / gamma_half(dim)


@dataclass(frozen=True)
class HalfSpacePoint:
    """A point ``(tangential, height)`` of the closed half-space."""

    tangential: tuple
    height: float

    def __post_init__(self):
        object.__setattr__(self, "tangential", tuple(float(t) for t in self.tangential))
        object.__setattr__(self, "height", float(self.height))
        if len(self.tangential) < 1:
            raise HalfSpaceError("a half-space point needs at least one tangential coordinate")
        if self.height < 0 or not np.isfinite(self.height):
            raise HalfSpaceError(f"height must be finite and nonnegative, got {self.height}")

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float).ravel()
        return cls(tuple(a[:-1]), a[-1])

    @property
    def dim(self):
        return len(self.tangential) + 1

    @property
    def interior(self):
        return self.height > 0

    def as_array(self):
        return np.array(self.tangential + (self.height,))

    def __array__(self, dtype=None, copy=None):
        return self.as_array() if dtype is None else self.as_array().astype(dtype)


def as_points(x, dim=None):
    """Coerce ``x`` to a float array with the coordinates on the last axis."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise HalfSpaceError("a point needs at least two coordinates")
    if dim is not None and x.shape[-1] != dim:
        raise HalfSpaceError(f"expected points in R^{dim}, got last axis {x.shape[-1]}")
    check_dim(x.shape[-1])
    return x


def require_interior(x):
    x = as_points(x)
    if np.any(~(x[..., -1] > 0)):
        raise HalfSpaceError("points must lie in the open half-space (height > 0)")
    return x


def mirror(x):
    """Reflection ``(x', x_N) -> (x', -x_N)`` across the boundary."""
    if isinstance(x, HalfSpacePoint):
        a = x.as_array()
        a[-1] = -a[-1]
        return a
    y = np.array(x, dtype=float, copy=True)
    y[..., -1] = -y[..., -1]
    return y


def cyl_norm(v):
    """Cylindrical norm ``max(|v'|, |v_N|)`` over the last axis."""
    v = np.asarray(v, dtype=float)
    return np.maximum(np.linalg.norm(v[..., :-1], axis=-1), np.abs(v[..., -1]))


@dataclass(frozen=True)
class CylinderBall:
    """Open cylindrical ball ``{y : |y - center|_* < radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_points(np.asarray(self.center, dtype=float)))
        if not self.radius > 0:
            raise HalfSpaceError("radius must be positive")

    @property
    def dim(self):
        return self.center.shape[-1]

    def contains(self, y):
        return cyl_norm(np.asarray(y) - self.center) < self.radius

    def in_annulus(self, y):
        """Membership in ``B*_{2R} minus B*_R`` (the dyadic annulus)."""
        d = cyl_norm(np.asarray(y) - self.center)
        return (d >= self.radius) & (d < 2 * self.radius)

    def bounding_box(self):
        """Axis-aligned box ``(lo, hi)`` of the ball intersected with the half-space."""
        lo = self.center - self.radius
        hi = self.center + self.radius
        lo[-1] = max(lo[-1], 0.0)
        return lo, hi


@dataclass(frozen=True)
class LevelSetRing:
    """Super-level set ``{y : G^x(y) > 1/level}`` of the Green function, plus ``x``."""

    center: np.ndarray
    level: float

    def __post_init__(self):
        object.__setattr__(self, "center", require_interior(np.asarray(self.center, dtype=float)))
        if not self.level > 0:
            raise HalfSpaceError("level must be positive")

    def contains(self, y):
        from .kernels import green

        y = np.asarray(y, dtype=float)
        same = np.all(y == self.center, axis=-1)
        inside = y[..., -1] > 0
        g = np.zeros(np.broadcast_shapes(y.shape[:-1], self.center.shape[:-1]))
        ok = inside & ~same
        if np.any(ok):
            g[ok] = green(np.broadcast_to(self.center, y.shape)[ok], y[ok])
        return same | (ok & (g > 1.0 / self.level))
