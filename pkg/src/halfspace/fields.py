"""
Scalar fields on the half-space and finite-difference helpers.
"""

import numpy as np

from .geometry import as_points

PROVENANCES = ("assembled", "corpus", "user")


class ScalarField:
    """An evaluation procedure ``u`` on the open half-space.

    Parameters
    ----------
    dim : int
    evaluate : callable
        Maps points ``(M, N)`` to values ``(M,)``.  May return ``+inf`` or
        ``-inf`` as sentinels (e.g. at atoms of a Green potential).
    declared_h : float, optional
        Known slope of the linear term ``h x_N``.
    provenance : str
        ``"assembled"``, ``"corpus"`` or ``"user"``.
    singular_points : array_like, shape (k, N), optional
        Interior points where ``u`` may be infinite; quadrature routines
        excise them.
    focus : callable, optional
        ``focus(height)`` returns tangential points ``(k, N-1)`` and widths
        ``(k,)`` where ``u(., height)`` concentrates; used to place
        breakpoints for boundary pairings.
    name : str, optional
    laplacian : callable, optional
        Exact ``Laplace u`` where known.
    parts : list of ScalarField, optional
        Summands of ``u``.  Integrals of ``u`` against a weight may be
        computed part by part, so that a cheap singular summand and a costly
        smooth one each get the quadrature layout they need.
    """

    def __init__(self, dim, evaluate, declared_h=None, provenance="user", singular_points=None,
                 focus=None, name=None, laplacian=None, parts=None):
        if provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        self.dim = int(dim)
        self._evaluate = evaluate
        self.declared_h = None if declared_h is None else float(declared_h)
        self.provenance = provenance
        sp = np.zeros((0, self.dim)) if singular_points is None else np.asarray(singular_points, float)
        self.singular_points = sp.reshape(-1, self.dim)
        self.focus = focus
        self.name = name
        self.laplacian = laplacian
        self.parts = list(parts) if parts else None

    def __call__(self, x):
        x = as_points(x, self.dim)
        flat = x.reshape(-1, self.dim)
        out = np.asarray(self._evaluate(flat), dtype=float).reshape(x.shape[:-1])
        return float(out) if out.ndim == 0 else out

    evaluate = __call__

    @staticmethod
    def is_sentinel(values):
        """Mask of ``+-inf`` / NaN values."""
        return ~np.isfinite(np.asarray(values, dtype=float))

    # -- linear combinations ---------------------------------------------

    def _combine(self, other, a, b, name):
        if other.dim != self.dim:
            raise ValueError("fields live in different dimensions")
        f1, f2 = self._evaluate, other._evaluate

        def ev(p):
            return a * f1(p) + b * f2(p)

        h = None
        if self.declared_h is not None and other.declared_h is not None:
            h = a * self.declared_h + b * other.declared_h
        sp = np.vstack([self.singular_points, other.singular_points])
        focus = _merge_focus(self.focus, other.focus)
        lap = None
        if self.laplacian is not None and other.laplacian is not None:
            l1, l2 = self.laplacian, other.laplacian
            lap = lambda p: a * l1(p) + b * l2(p)
        prov = "assembled" if "assembled" in (self.provenance, other.provenance) else self.provenance
        parts = None
        if self.parts or other.parts:
            parts = [a * p for p in (self.parts or [self])] + [b * p for p in (other.parts or [other])]
        return ScalarField(self.dim, ev, h, prov, sp, focus, name, lap, parts)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0, f"({self.name} + {other.name})")

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0, f"({self.name} - {other.name})")

    def __mul__(self, a):
        a = float(a)
        f = self._evaluate
        lap = None if self.laplacian is None else (lambda p, l=self.laplacian: a * l(p))
        h = None if self.declared_h is None else a * self.declared_h
        parts = None if not self.parts else [a * p for p in self.parts]
        return ScalarField(self.dim, lambda p: a * f(p), h, self.provenance, self.singular_points,
                           self.focus, f"{a:g}*{self.name}", lap, parts)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"ScalarField({self.name or 'unnamed'}, dim={self.dim}, provenance={self.provenance!r})"


def _merge_focus(f1, f2):
    if f1 is None:
        return f2
    if f2 is None:
        return f1

    def focus(height):
        p1, w1 = f1(height)
        p2, w2 = f2(height)
        return np.vstack([p1, p2]), np.concatenate([w1, w2])

    return focus


def linear_field(dim, h=1.0):
    """The harmonic field ``h x_N``."""
    h = float(h)
    return ScalarField(dim, lambda p: h * p[:, -1], declared_h=h, provenance="assembled",
                       name=f"{h:g}*x_N", laplacian=lambda p: np.zeros(p.shape[0]))


def expression_field(text, dim, declared_h=None):
    """A user field from the expression grammar."""
    from .expressions import Expression

    ex = Expression(text, dim)
    return ScalarField(dim, ex, declared_h, "user", name=text)


def fd_laplacian(u, x, step):
    """Second-order ``2N``-point discrete Laplacian of ``u`` at points ``x``."""
    x = as_points(x)
    n = x.shape[-1]
    centre = np.asarray(u(x), dtype=float)
    total = -2.0 * n * centre
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        total = total + np.asarray(u(x + e)) + np.asarray(u(x - e))
    return total / step**2
