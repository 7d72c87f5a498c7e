"""
Measures on the half-space (interior, ``mu``) and on its boundary (``nu``).

A measure is a finite list of weighted atoms plus zero or more densities.
Densities are either named closed forms (``gauss``, ``uniform_box``,
``bump``) or expressions in the small grammar of
:mod:`halfspace.expressions`, each with a declared support descriptor: a
compact box, or a decay exponent ``p`` promising
``|f(y)| <= C (1 + |y|)^{-p}``.

Measure documents are plain mappings (YAML or JSON on disk)::

    dim: 2
    side: boundary
    atoms:
      - {loc: [0.0], w: 1.0}
    density:
      name: gauss
      params: {center: [0.0], width: 1.0, amplitude: 1.0}
      support: {decay: inf}

A density may carry a real ``weight`` (default 1); signed measures are split
into positive and negative parts by the signs of atom and density weights.
"""

import itertools
import math
from pathlib import Path

import numpy as np
import yaml

from .errors import MeasureError
from .expressions import Expression
from .geometry import CylinderBall, check_dim, sphere_area
from .quadrature import DEFAULT_SPEC, Box, cyl_shell_regions, integrate

SIDES = ("interior", "boundary")
NAMED = ("gauss", "uniform_box", "bump")

# gauss profile is below 1e-18 of its peak beyond this many widths
_GAUSS_REACH = 6.5


def _vec(v, n, what):
    try:
        a = np.asarray(v, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise MeasureError(f"{what} must be a list of numbers") from None
    if a.size != n or not np.all(np.isfinite(a)):
        raise MeasureError(f"{what} must have {n} finite coordinates, got {v!r}")
    return a


def _decay_value(p):
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        try:
            p = float(p)
        except ValueError:
            raise MeasureError(f"bad decay exponent {p!r}") from None
    p = float(p)
    if not p >= 0:
        raise MeasureError("decay exponent must be nonnegative")
    return p


def _num(x):
    x = float(x)
    return "inf" if math.isinf(x) else x


class Density:
    """A closed-form density with a declared support descriptor.

    Parameters
    ----------
    ncoord : int
        Number of coordinates of the points it is evaluated on (``N`` for
        interior densities, ``N - 1`` for boundary densities).
    name : str, optional
        One of ``gauss``, ``uniform_box``, ``bump``.
    expression : str, optional
        Alternative to ``name``.
    params : dict, optional
    support : dict, optional
        ``{"box": [lo, hi]}`` or ``{"decay": p}``; named densities supply a
        default.
    weight : float
        Real multiplier; its sign decides which part of a signed measure the
        density belongs to.
    """

    def __init__(self, ncoord, name=None, expression=None, params=None, support=None, weight=1.0):
        if (name is None) == (expression is None):
            raise MeasureError("a density needs exactly one of 'name' or 'expression'")
        self.ncoord = int(ncoord)
        self.name = name
        self.expression = expression
        self.weight = float(weight)
        if not math.isfinite(self.weight):
            raise MeasureError("density weight must be finite")
        params = dict(params or {})
        n = self.ncoord
        self.radial = False
        if name == "gauss":
            self.center = _vec(params.pop("center", np.zeros(n)), n, "gauss center")
            self.width = float(params.pop("width", 1.0))
            self.amplitude = float(params.pop("amplitude", 1.0))
            if not self.width > 0:
                raise MeasureError("gauss width must be positive")
            self.radial = True
            self.extent = _GAUSS_REACH * self.width
            self.scale = self.width
            default_support = {"decay": math.inf}
        elif name == "bump":
            self.center = _vec(params.pop("center", np.zeros(n)), n, "bump center")
            self.radius = float(params.pop("radius", 1.0))
            self.amplitude = float(params.pop("amplitude", 1.0))
            if not self.radius > 0:
                raise MeasureError("bump radius must be positive")
            self.radial = True
            self.extent = self.radius
            self.scale = self.radius / 4.0
            default_support = {"box": [list(self.center - self.radius), list(self.center + self.radius)]}
        elif name == "uniform_box":
            self.lo = _vec(params.pop("lo", np.zeros(n)), n, "uniform_box lo")
            self.hi = _vec(params.pop("hi", np.ones(n)), n, "uniform_box hi")
            self.value = float(params.pop("value", 1.0))
            if np.any(self.hi <= self.lo):
                raise MeasureError("uniform_box needs lo < hi")
            self.center = 0.5 * (self.lo + self.hi)
            self.extent = 0.5 * float(np.linalg.norm(self.hi - self.lo))
            self.scale = 0.5 * float(np.min(self.hi - self.lo))
            default_support = {"box": [list(self.lo), list(self.hi)]}
        elif name is not None:
            raise MeasureError(f"unknown density name {name!r}; expected one of {NAMED}")
        else:
            self._expr = Expression(expression, n)
            default_support = None
        if params:
            raise MeasureError(f"unknown parameters {sorted(params)} for density {name or expression!r}")
        support = support if support is not None else default_support
        if support is None:
            raise MeasureError("expression densities need a support descriptor")
        self._set_support(support)
        if name is None:
            if self.box is not None:
                self.center = 0.5 * (self.box[0] + self.box[1])
                self.extent = 0.5 * float(np.linalg.norm(self.box[1] - self.box[0]))
                self.scale = 0.25 * float(np.min(self.box[1] - self.box[0]))
            else:
                self.center = np.zeros(n)
                self.extent = None
                self.scale = 1.0

    def _set_support(self, support):
        if not isinstance(support, dict) or len(support) != 1 or not set(support) <= {"box", "decay"}:
            raise MeasureError("support must be {box: [lo, hi]} or {decay: p}")
        self.box = None
        self.decay = None
        if "box" in support:
            b = support["box"]
            if not isinstance(b, (list, tuple)) or len(b) != 2:
                raise MeasureError("support box must be [lo, hi]")
            lo = _vec(b[0], self.ncoord, "support box lo")
            hi = _vec(b[1], self.ncoord, "support box hi")
            if np.any(hi <= lo):
                raise MeasureError("support box needs lo < hi")
            self.box = (lo, hi)
        else:
            self.decay = _decay_value(support["decay"])

    # -- evaluation -------------------------------------------------------

    def base(self, points):
        """Density values without the ``weight`` factor."""
        p = np.asarray(points, dtype=float)
        if self.name == "gauss":
            r2 = np.sum((p - self.center) ** 2, axis=-1)
            return self.amplitude * np.exp(-r2 / self.width**2)
        if self.name == "bump":
            return self.profile_base(np.linalg.norm(p - self.center, axis=-1))
        if self.name == "uniform_box":
            inside = np.all((p >= self.lo) & (p <= self.hi), axis=-1)
            return np.where(inside, self.value, 0.0)
        v = self._expr(p)
        if self.box is not None:
            inside = np.all((p >= self.box[0]) & (p <= self.box[1]), axis=-1)
            v = np.where(inside, v, 0.0)
        return v

    def __call__(self, points):
        return self.weight * self.base(points)

    def profile_base(self, rho):
        """Radial profile (radial densities only), without ``weight``."""
        rho = np.asarray(rho, dtype=float)
        if self.name == "gauss":
            return self.amplitude * np.exp(-((rho / self.width) ** 2))
        if self.name == "bump":
            q = (rho / self.radius) ** 2
            out = np.zeros_like(q)
            m = q < 1
            out[m] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - q[m]))
            return out
        raise MeasureError("density is not radial")

    def profile(self, rho):
        return self.weight * self.profile_base(rho)

    @property
    def localized(self):
        """True when all mass lies within ``extent`` of ``center`` (to 1e-18)."""
        return self.extent is not None

    # -- documents --------------------------------------------------------

    def params(self):
        if self.name == "gauss":
            return {"center": [float(c) for c in self.center], "width": self.width, "amplitude": self.amplitude}
        if self.name == "bump":
            return {"center": [float(c) for c in self.center], "radius": self.radius, "amplitude": self.amplitude}
        if self.name == "uniform_box":
            return {"lo": [float(c) for c in self.lo], "hi": [float(c) for c in self.hi], "value": self.value}
        return {}

    def support_doc(self):
        if self.box is not None:
            return {"box": [[float(c) for c in self.box[0]], [float(c) for c in self.box[1]]]}
        return {"decay": _num(self.decay)}

    def to_document(self):
        doc = {"name": self.name} if self.name else {"expression": self.expression}
        doc["params"] = self.params()
        doc["support"] = self.support_doc()
        doc["weight"] = self.weight
        return doc

    def scaled(self, a):
        d = self.to_document()
        d["weight"] = d["weight"] * a
        return density_from_document(d, self.ncoord)

    def __repr__(self):
        label = self.name or self.expression
        return f"Density({label!r}, weight={self.weight})"


def density_from_document(doc, ncoord):
    if not isinstance(doc, dict):
        raise MeasureError("density entry must be a mapping")
    extra = set(doc) - {"name", "expression", "params", "support", "weight"}
    if extra:
        raise MeasureError(f"unknown density keys {sorted(extra)}")
    return Density(
        ncoord,
        name=doc.get("name"),
        expression=doc.get("expression"),
        params=doc.get("params"),
        support=doc.get("support"),
        weight=doc.get("weight", 1.0),
    )


class Measure:
    """Atoms plus densities on the interior or on the boundary.

    Attributes
    ----------
    dim : int
        Dimension ``N`` of the half-space.
    side : str
        ``"interior"`` or ``"boundary"``.
    locs : ndarray, shape (k, ncoord)
    weights : ndarray, shape (k,)
    densities : tuple of Density
    """

    side = None

    def __init__(self, dim, atoms=(), densities=()):
        self.dim = check_dim(dim)
        n = self.ncoord
        locs, weights = [], []
        for loc, w in atoms:
            loc = _vec(loc, n, "atom location")
            w = float(w)
            if not math.isfinite(w):
                raise MeasureError("atom weight must be finite")
            if self.side == "interior" and not loc[-1] > 0:
                raise MeasureError(f"atom {list(loc)} is not interior (height must be > 0)")
            locs.append(loc)
            weights.append(w)
        self.locs = np.array(locs, dtype=float).reshape(len(locs), n)
        self.weights = np.array(weights, dtype=float)
        self.densities = tuple(densities)
        for d in self.densities:
            if d.ncoord != n:
                raise MeasureError("density lives in the wrong number of coordinates")
        self.locs.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def ncoord(self):
        return self.dim if self.side == "interior" else self.dim - 1

    @property
    def atoms(self):
        return list(zip(self.locs, self.weights))

    @property
    def is_zero(self):
        return not np.any(self.weights != 0) and not any(d.weight != 0 for d in self.densities)

    @property
    def is_positive(self):
        return bool(np.all(self.weights >= 0)) and all(d.weight >= 0 for d in self.densities)

    def positive_part(self):
        keep = self.weights > 0
        return type(self)(self.dim, zip(self.locs[keep], self.weights[keep]), [d for d in self.densities if d.weight > 0])

    def negative_part(self):
        keep = self.weights < 0
        return type(self)(
            self.dim,
            zip(self.locs[keep], -self.weights[keep]),
            [d.scaled(-1.0) for d in self.densities if d.weight < 0],
        )

    def scaled(self, a):
        return type(self)(self.dim, zip(self.locs, a * self.weights), [d.scaled(a) for d in self.densities])

    def __add__(self, other):
        if type(other) is not type(self) or other.dim != self.dim:
            raise MeasureError("can only add measures of the same side and dimension")
        return type(self)(
            self.dim,
            list(self.atoms) + list(other.atoms),
            self.densities + other.densities,
        )

    def density_value(self, points):
        p = np.asarray(points, dtype=float)
        out = np.zeros(p.shape[:-1])
        for d in self.densities:
            out = out + d(p)
        return out

    def to_document(self):
        doc = {
            "dim": self.dim,
            "side": self.side,
            "atoms": [{"loc": [float(c) for c in loc], "w": float(w)} for loc, w in self.atoms],
        }
        if len(self.densities) == 1:
            doc["density"] = self.densities[0].to_document()
        elif self.densities:
            doc["density"] = [d.to_document() for d in self.densities]
        return doc

    def __eq__(self, other):
        return isinstance(other, Measure) and self.to_document() == other.to_document()

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, atoms={len(self.weights)}, densities={list(self.densities)})"


class InteriorMeasure(Measure):
    """A measure ``mu`` on the open half-space."""

    side = "interior"


class BoundaryMeasure(Measure):
    """A measure ``nu`` on the boundary hyperplane ``R^{N-1}``."""

    side = "boundary"


def zero_measure(dim, side):
    return (InteriorMeasure if side == "interior" else BoundaryMeasure)(dim)


def serialize(m):
    """Canonical document of a measure (inverse of :func:`load_measure`)."""
    return m.to_document()


def dump_measure(m, path=None):
    """YAML text of a measure; written to ``path`` when given."""
    text = yaml.safe_dump(serialize(m), sort_keys=True)
    if path is not None:
        Path(path).write_text(text)
    return text


def _infer_dim(document):
    # without 'dim', atom coordinates fix it: N for interior atoms, N - 1 on the boundary
    atoms = document.get("atoms") or []
    lens = {len(a["loc"]) for a in atoms if isinstance(a, dict) and isinstance(a.get("loc"), (list, tuple))}
    if len(lens) != 1:
        raise MeasureError("measure document needs 'dim'")
    (k,) = lens
    return k + 1 if document.get("side") == "boundary" else k


def load_measure(document, positive=False, dim=None, check_decay=True):
    """Validate a measure document and build the measure.

    Parameters
    ----------
    document : dict, str or path
        A mapping, YAML/JSON text, or a path to a YAML/JSON file.
    positive : bool
        Reject negative weights when True.
    dim : int, optional
        Expected dimension; also used when the document omits ``dim``.
        Without either, the atom coordinates decide (interior unless the
        document says ``side: boundary``).
    check_decay : bool
        Spot-check declared decay descriptors at 32 far-field points.

    Returns
    -------
    InteriorMeasure or BoundaryMeasure

    Raises
    ------
    MeasureError
    """
    if isinstance(document, Path) or (isinstance(document, str) and "\n" not in document and Path(document).is_file()):
        document = Path(document).read_text()
    if isinstance(document, str):
        try:
            document = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise MeasureError(f"cannot parse measure document: {exc}") from None
    if not isinstance(document, dict):
        raise MeasureError("measure document must be a mapping")
    extra = set(document) - {"dim", "side", "atoms", "density"}
    if extra:
        raise MeasureError(f"unknown measure keys {sorted(extra)}")
    n = document.get("dim", dim)
    if n is None:
        n = _infer_dim(document)
    try:
        n = check_dim(n)
    except ValueError as exc:
        raise MeasureError(str(exc)) from None
    if dim is not None and n != dim:
        raise MeasureError(f"measure has dim {n}, expected {dim}")
    atoms_doc = document.get("atoms") or []
    if not isinstance(atoms_doc, list):
        raise MeasureError("'atoms' must be a list")
    side = document.get("side")
    if side is None:
        lens = {len(a.get("loc", ())) for a in atoms_doc if isinstance(a, dict)}
        if lens == {n}:
            side = "interior"
        elif lens == {n - 1}:
            side = "boundary"
        else:
            raise MeasureError("cannot infer 'side'; please state interior or boundary")
    if side not in SIDES:
        raise MeasureError(f"side must be one of {SIDES}")
    atoms = []
    for a in atoms_doc:
        if not isinstance(a, dict) or set(a) != {"loc", "w"}:
            raise MeasureError("each atom must be a mapping with keys loc and w")
        atoms.append((a["loc"], a["w"]))
    ncoord = n if side == "interior" else n - 1
    dens_doc = document.get("density")
    if dens_doc is None:
        dens_doc = []
    elif isinstance(dens_doc, dict):
        dens_doc = [dens_doc]
    densities = [density_from_document(d, ncoord) for d in dens_doc]
    cls = InteriorMeasure if side == "interior" else BoundaryMeasure
    m = cls(n, atoms, densities)
    if positive and not m.is_positive:
        raise MeasureError("negative weight in a positive-measure context")
    if check_decay:
        for d in m.densities:
            _spot_check(d, side, positive)
    return m


def _spot_check(d, side, positive):
    """Check a declared support descriptor (and sign) at seeded sample points."""
    rng = np.random.default_rng(20240617)
    n = d.ncoord

    def cloud(r_lo, r_hi, count):
        v = rng.normal(size=(count, n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), size=(count, 1)))
        p = v * r
        if side == "interior":
            p[:, -1] = np.abs(p[:, -1])
        return p

    near = d.center + cloud(0.05, 4.0, 64)
    if side == "interior":
        near[:, -1] = np.abs(near[:, -1])
    vals = d.base(near)
    if positive and np.any(vals < 0):
        raise MeasureError(f"density {d!r} takes negative values in a positive-measure context")
    if d.box is not None:
        lo, hi = d.box
        span = float(np.max(hi - lo))
        far = cloud(2.0 * span + 1.0, 64.0 * span + 32.0, 32) + 0.5 * (lo + hi)
        if side == "interior":
            far[:, -1] = np.abs(far[:, -1])
        outside = ~np.all((far >= lo) & (far <= hi), axis=-1)
        if np.any(d.base(far[outside]) != 0):
            raise MeasureError(f"density {d!r} is nonzero outside its declared support box")
        return
    p = d.decay
    far = cloud(16.0, 1024.0, 32)
    fv = np.abs(d.base(far))
    if not np.all(np.isfinite(fv)):
        raise MeasureError(f"density {d!r} is not finite at far-field samples")
    if math.isinf(p):
        # super-polynomial decay: compare against a steep power law
        p = 12.0
    c = np.max(np.abs(vals) * (1 + np.linalg.norm(near, axis=-1)) ** p)
    c = max(c, 1e-300)
    bound = c * (1 + np.linalg.norm(far, axis=-1)) ** (-p)
    if np.any(fv > 10.0 * bound):
        raise MeasureError(f"density {d!r} violates its declared decay exponent {d.decay} at far-field samples")


# ---------------------------------------------------------------------------
# integrals of measures


def _density_box(d, side, pad=0.0):
    """A bounding box for the effective support, or None when unbounded."""
    if d.box is not None:
        lo, hi = d.box[0].copy(), d.box[1].copy()
    elif d.localized:
        lo, hi = d.center - d.extent, d.center + d.extent
    else:
        return None
    if side == "interior":
        lo[-1] = max(lo[-1], 0.0)
    return lo, hi


def weighted_mass(mu, region, q=DEFAULT_SPEC):
    """``int_region x_N d|mu|`` for a bounded cylindrical ball ``region``.

    Atoms contribute ``x_N |w|``; densities are integrated by adaptive
    quadrature over the region clipped to the half-space.
    """
    if not isinstance(region, CylinderBall):
        raise MeasureError("region must be a CylinderBall")
    if mu.side != "interior":
        raise MeasureError("weighted_mass is defined for interior measures")
    inside = region.contains(mu.locs) if len(mu.weights) else np.zeros(0, bool)
    total = float(np.sum(mu.locs[inside, -1] * np.abs(mu.weights[inside]))) if len(mu.weights) else 0.0
    c = region.center
    R = region.radius
    for d in mu.densities:
        f = lambda p, d=d: p[:, -1] * np.abs(d(p))
        box = _density_box(d, "interior")
        regions = None
        if box is not None:
            blo, bhi = box
            rlo, rhi = region.bounding_box()
            tang_in = np.all(blo[:-1] >= rlo[:-1]) and np.all(bhi[:-1] <= rhi[:-1])
            if d.box is not None and (tang_in and mu.dim >= 3 and np.linalg.norm(np.maximum(np.abs(blo[:-1] - c[:-1]), np.abs(bhi[:-1] - c[:-1]))) < R):
                lo = np.maximum(blo, rlo)
                hi = np.minimum(bhi, rhi)
                regions = [Box(lo, hi)] if np.all(hi > lo) else []
            elif mu.dim == 2:
                lo = np.maximum(blo, rlo)
                hi = np.minimum(bhi, rhi)
                regions = [Box(lo, hi)] if np.all(hi > lo) else []
        if regions is None:
            regions = cyl_shell_regions(c[:-1], 0.0, R, max(c[-1] - R, 0.0), c[-1] + R)
            if d.box is not None:
                lo, hi = d.box
                f = lambda p, d=d, lo=lo, hi=hi: p[:, -1] * np.abs(d(p)) * np.all((p >= lo) & (p <= hi), axis=-1)
        if regions:
            est, _ = integrate(f, regions, q)
            total += float(est)
    return total


def _tail_bound(d, side, dim, radius):
    """Bound on the decay-functional integrand's mass beyond ``radius``."""
    p = d.decay
    if p is None or math.isinf(p):
        return 0.0
    # C from the declared decay, estimated at the center scale
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(256, d.ncoord)) * 4.0
    if side == "interior":
        pts[:, -1] = np.abs(pts[:, -1])
    c = float(np.max(np.abs(d(pts)) * (1 + np.linalg.norm(pts, axis=-1)) ** p))
    if side == "interior":
        if p <= 1:
            return math.inf
        return c * 0.5 * sphere_area(dim) * radius ** (1 - p) / (p - 1)
    if p <= -1:
        return math.inf
    return c * sphere_area(dim - 1) * radius ** (-1 - p) / (1 + p)


def _box_shell(r, R, ncoord, interior):
    """Boxes tiling ``[-R, R]^n`` minus ``[-r, r]^n`` (last axis ``[0, R]`` when interior)."""
    axes = [[(-R, -r), (-r, r), (r, R)] for _ in range(ncoord)]
    if interior:
        axes[-1] = [(0.0, r), (r, R)]
    boxes = []
    for combo in itertools.product(*[range(len(a)) for a in axes]):
        iv = [axes[j][k] for j, k in enumerate(combo)]
        if all(abs(a) < r * (1 + 1e-15) and abs(b) <= r * (1 + 1e-15) for a, b in iv):
            continue
        boxes.append(Box(np.array([a for a, _ in iv]), np.array([b for _, b in iv])))
    return boxes


def total_decay_functional(mu, q=DEFAULT_SPEC):
    """``int y_N / (1 + |y|^N) d|mu|`` (interior) or ``int 1 / (1 + |y'|^N) d|nu|``.

    Unbounded densities are truncated at a radius where the tail bound from
    the declared decay exponent falls below ``rel_tol`` times the running
    estimate.  Returns ``inf`` when that tail bound diverges.
    """
    n = mu.dim
    interior = mu.side == "interior"

    def weight(p):
        r = np.linalg.norm(p, axis=-1)
        w = 1.0 / (1.0 + r**n)
        return p[:, -1] * w if interior else w

    total = 0.0
    if len(mu.weights):
        total += float(np.sum(weight(mu.locs) * np.abs(mu.weights)))
    for d in mu.densities:
        f = lambda p, d=d: weight(p) * np.abs(d(p))
        box = _density_box(d, mu.side)
        if box is not None:
            est, _ = integrate(f, [Box(*box)], q)
            total += float(est)
            continue
        radius = 8.0
        lo = -radius * np.ones(d.ncoord)
        hi = radius * np.ones(d.ncoord)
        if interior:
            lo[-1] = 0.0
        est = float(integrate(f, [Box(lo, hi)], q)[0])
        while True:
            tail = _tail_bound(d, mu.side, n, radius)
            if tail == math.inf:
                return math.inf
            # each shell adds a well-scaled piece; a single huge box would miss the bulk
            shell = float(integrate(f, _box_shell(radius, 4.0 * radius, d.ncoord, interior), q)[0])
            est += shell
            radius *= 4.0
            tail = _tail_bound(d, mu.side, n, radius)
            if math.isinf(d.decay):
                done = abs(shell) <= q.rel_tol * abs(est)
            else:
                done = tail <= q.rel_tol * max(abs(est), q.abs_floor)
            if done or radius > 1e12:
                total += est + tail
                break
    return total
