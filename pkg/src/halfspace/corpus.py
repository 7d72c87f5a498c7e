"""
A versioned registry of example fields with machine-checkable expectations.

Each :class:`CorpusEntry` builds a :class:`~halfspace.fields.ScalarField`
for a given dimension and lists :class:`Expectation` records.  An
expectation names a suite (a ring scan, a finite-difference sign check, a
boundary-integrability probe, a boundary-trace check, a comparison against
an independent formula, or a test of the lift to ``R^{N+2}``), the verdict
the suite should return, and the statement that predicts it.

:func:`run_corpus` runs every expectation and returns a deterministic
report; the registry's contract is that every row passes.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np
from scipy.special import wofz

from .errors import HalfSpaceError, PreconditionError, QuadratureError
from .fields import ScalarField, fd_laplacian, linear_field
from .huber import annulus_comparison, annulus_split_bound, lift, spherical_mean
from .measures import load_measure
from .potentials import RepresentationTriple, _poisson_adaptive, represent
from .quadrature import DEFAULT_SPEC, RayShell, integrate
from .rings import scan
from .weakform import (
    BoundaryProfile,
    boundary_pairing,
    counterexample_field,
    lim_trace,
)

CORPUS_VERSION = 1
SUITES = ("ring", "harmonic", "superharmonic", "boundary-l1", "trace", "trace-bound", "trace-lower",
          "reference", "huber-mean", "huber-annulus")


@dataclass(frozen=True)
class Expectation:
    """One machine-checkable claim about a corpus field.

    Attributes
    ----------
    suite : str
        One of :data:`SUITES`.
    expected : str
        The verdict the suite should produce.
    claim : str
        The statement that predicts the verdict.
    params : dict
        Suite options (condition, slope, scan levels, ...).
    """

    suite: str
    expected: str
    claim: str
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {"suite": self.suite, "expected": self.expected, "claim": self.claim, "params": dict(self.params)}


@dataclass(frozen=True)
class CorpusEntry:
    """A named field, the dimensions it is defined in, and its expectations."""

    name: str
    dims: tuple
    build: object
    expectations: tuple
    description: str = ""

    def field(self, dim):
        if dim not in self.dims:
            raise HalfSpaceError(f"corpus entry {self.name!r} is not defined for N = {dim}")
        return self.build(dim)

    def to_dict(self):
        return {
            "name": self.name,
            "dims": list(self.dims),
            "description": self.description,
            "expectations": [e.to_dict() for e in self.expectations],
        }


# ---------------------------------------------------------------------------
# field builders


def _norm(p):
    return np.linalg.norm(p, axis=-1)


def _expr(name, fn, lap=None):
    def build(dim):
        return ScalarField(dim, lambda p: fn(p, dim), provenance="corpus", name=name,
                           laplacian=None if lap is None else (lambda p: lap(p, dim)))

    return build


def _constant(p, n):
    return np.ones(p.shape[0])


def _gaussian(p, n):
    return np.exp(-np.sum(p * p, axis=-1))


def _xn_u2_l1_exponent(n):
    # x_N u^2 is integrable at infinity once 2a > N + 1
    return 0.5 * (n + 1) + 0.25


def _xn_u2_l1(p, n):
    return (1.0 + np.sum(p * p, axis=-1)) ** (-0.5 * _xn_u2_l1_exponent(n))


def _inv_one_plus_xn(p, n):
    return 1.0 / (1.0 + p[:, -1])


def _sqrt_growth(p, n):
    return np.sqrt(_norm(p))


def _morrey(p, n):
    return _norm(p) ** (-0.5 * n)


def _unotl1c(p, n):
    r2 = np.sum(p * p, axis=-1)
    return r2 ** (-0.5 * n) * (1.0 - n * p[:, -1] ** 2 / r2)


def _neg_inv_square(p, n):
    return -1.0 / np.sum(p * p, axis=-1)


def _neg_inv_square_lap(p, n):
    # Laplace(-|x|^-2) = -4 |x|^-4 in the plane
    return -4.0 / np.sum(p * p, axis=-1) ** 2


def _linear(dim):
    u = linear_field(dim, 1.0)
    u.provenance = "corpus"
    u.name = "x_N"
    return u


def _gauss_density(dim):
    return load_measure({"dim": dim, "side": "boundary", "density": {"name": "gauss"}})


def _unit_atom(dim):
    loc = [0.0] * (dim - 1) + [1.0]
    return load_measure({"dim": dim, "side": "interior", "atoms": [{"loc": loc, "w": 1.0}]})


def _poisson_gauss(dim):
    u = represent(RepresentationTriple.of(dim, 0.0, nu=_gauss_density(dim)))
    u.provenance = "corpus"
    u.name = "P[gauss]"
    return u


def _green_delta(dim):
    u = represent(RepresentationTriple.of(dim, 0.0, mu=_unit_atom(dim)))
    u.provenance = "corpus"
    u.name = "G[delta]"
    return u


def _counterexample(which):
    def build(dim):
        return counterexample_field(which)

    return build


# ---------------------------------------------------------------------------
# the registry

_R0 = "(R+0)"
_LP = "functions in L^p satisfy (R+0)"
_BOUNDED = "bounded functions satisfy (R+0)"
_PSI = {"kind": "bump", "center": [0.0], "width": 1.0}


def _ring(expected, claim, condition=_R0, h=0.0, levels=8):
    return Expectation("ring", expected, claim, {"condition": condition, "h": h, "levels": levels})


def registry():
    """All corpus entries, in a fixed order."""
    both = (2, 3)
    return [
        CorpusEntry(
            "linear", both, _linear,
            (
                _ring("satisfied", "h x_N satisfies (R+) with its own slope", "(R+)", 1.0),
                _ring("not-satisfied", "the weighted ring mean of x_N stays constant", _R0),
                Expectation("harmonic", "harmonic", "x_N is harmonic"),
                Expectation("huber-mean", "holds", "the lift of x_N is the constant 1"),
                Expectation("huber-annulus", "holds", "inclusion inequalities for lifted cylinders"),
            ),
            "u = x_N",
        ),
        CorpusEntry(
            "constant", both, _expr("1", _constant),
            (
                _ring("satisfied", _BOUNDED, levels=24),
                _ring("not-satisfied", "bounded functions need not satisfy the whole-space ring condition",
                      "(R)", 0.0, levels=8),
                Expectation("harmonic", "harmonic", "constants are harmonic"),
                Expectation("huber-mean", "holds", "positive harmonic functions lift to superharmonic ones"),
                Expectation("huber-annulus", "holds", "inclusion inequalities for lifted cylinders"),
            ),
            "u = 1",
        ),
        CorpusEntry(
            "gaussian", both, _expr("exp(-|x|^2)", _gaussian),
            (_ring("satisfied", _LP),),
            "u = exp(-|x|^2), in every L^p",
        ),
        CorpusEntry(
            "xn_u2_l1", both, _expr("(1+|x|^2)^(-a/2)", _xn_u2_l1),
            (_ring("satisfied", "x_N |u|^p in L^1 implies (R+0)"),),
            "u = (1 + |x|^2)^(-a/2) with a = (N+1)/2 + 1/4, so that x_N u^2 is integrable",
        ),
        CorpusEntry(
            "inv_one_plus_xn", both, _expr("1/(1+x_N)", _inv_one_plus_xn),
            (_ring("satisfied", "x_N |u| bounded implies (R+0)", levels=10),),
            "u = 1 / (1 + x_N)",
        ),
        CorpusEntry(
            "sqrt_growth", both, _expr("|x|^(1/2)", _sqrt_growth),
            (_ring("satisfied", "growth |x|^p with p < 1 implies (R+0)", levels=40),),
            "u = |x|^(1/2)",
        ),
        CorpusEntry(
            "morrey", both, _expr("|x|^(-N/2)", _morrey),
            (_ring("satisfied", "Campanato-Morrey functions satisfy (R+0)"),),
            "u = |x|^(-N/2): in a Morrey space but not in L^2",
        ),
        CorpusEntry(
            "unotl1c", both, _expr("|x|^-N (1 - N x_N^2/|x|^2)", _unotl1c),
            (
                Expectation("harmonic", "harmonic", "u is harmonic in the open half-space"),
                _ring("satisfied", "u decays like |x|^-N"),
                Expectation("boundary-l1", "diverges", "u is not integrable up to the boundary near 0",
                            {"deltas": [1e-1, 1e-2, 1e-3]}),
            ),
            "u = |x|^-N (1 - N x_N^2 / |x|^2)",
        ),
        CorpusEntry(
            "neg_inv_square", (2,), _expr("-|x|^-2", _neg_inv_square, _neg_inv_square_lap),
            (
                Expectation("superharmonic", "superharmonic", "-Laplace u = 4 |x|^-4 >= 0"),
                _ring("satisfied", "u decays like |x|^-2"),
                Expectation("boundary-l1", "diverges", "u is not integrable up to the boundary near 0",
                            {"deltas": [1e-1, 1e-2, 1e-3]}),
            ),
            "u = -|x|^-2 in the half-plane",
        ),
        CorpusEntry(
            "remark_u", (2,), _counterexample("u"),
            (
                Expectation("trace-bound", "holds", "|T_eps(psi)| <= 2 sqrt(eps) |psi'|_inf", {"psi": _PSI}),
                Expectation("trace", "converges", "the pairings vanish as eps -> 0", {"psi": _PSI, "target": 0.0}),
            ),
            "eps^-1/2 (m_eps(x - eps) - m_eps(x + eps)) at height eps",
        ),
        CorpusEntry(
            "remark_u_plus", (2,), _counterexample("u+"),
            (
                Expectation("trace-lower", "holds", "T_eps(psi) >= psi(0) / (4 sqrt(eps))", {"psi": _PSI}),
                Expectation("trace", "diverges", "the positive part has no boundary trace", {"psi": _PSI}),
            ),
            "eps^-1/2 m_eps(x - eps) at height eps",
        ),
        CorpusEntry(
            "remark_v", (2,), _counterexample("v"),
            (Expectation("trace", "converges", "pairings tend to psi(0) - psi(0) = 0",
                         {"psi": _PSI, "target": 0.0}),),
            "m_eps(x - eps) - m_eps(x + eps) at height eps",
        ),
        CorpusEntry(
            "remark_v_plus", (2,), _counterexample("v+"),
            (Expectation("trace", "converges", "pairings tend to psi(0)", {"psi": _PSI, "target": 1.0}),),
            "m_eps(x - eps) at height eps",
        ),
        CorpusEntry(
            "poisson_gauss_ref", both, _poisson_gauss,
            (
                Expectation("reference", "matches", "Poisson integral of exp(-|y'|^2) against an independent formula"),
                _ring("satisfied", "Poisson integrals of integrable data decay like x_N |x|^-N"),
                Expectation("huber-mean", "holds", "positive harmonic functions lift to superharmonic ones"),
            ),
            "Poisson integral of exp(-|y'|^2)",
        ),
        CorpusEntry(
            "green_delta_ref", both, _green_delta,
            (
                Expectation("reference", "matches", "Green function against the mirror-image formula"),
                _ring("satisfied", "Green potentials of finite mass decay like x_N |x|^-N"),
                Expectation("huber-mean", "holds", "positive superharmonic functions lift to superharmonic ones"),
                Expectation("huber-annulus", "holds", "inclusion inequalities for lifted cylinders"),
            ),
            "Green potential of a unit mass at (0, ..., 0, 1)",
        ),
    ]


def get_entry(name):
    for e in registry():
        if e.name == name:
            return e
    raise HalfSpaceError(f"unknown corpus entry {name!r}")


def registry_json():
    """The registry as JSON (fields are described, not serialized)."""
    return json.dumps({"version": CORPUS_VERSION, "entries": [e.to_dict() for e in registry()]},
                      indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# suites; each returns (observed verdict, metric, detail)


def _center(dim):
    x = np.zeros(dim)
    x[-1] = 1.0
    return x


def _samples(dim, count, seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-2.0, 2.0, size=(count, dim))
    p[:, -1] = rng.uniform(0.5, 2.5, size=count)
    return p


def suite_ring(u, dim, params, q, seed):
    rep = scan(u, params.get("h", 0.0), _center(dim), params["condition"], levels=params.get("levels", 8), q=q)
    return rep.verdict, rep.slope, f"min={rep.min_value:.6g} tol={rep.verdict_tol:.3g}"


def fd_harmonic_residuals(u, points, steps=(1e-2, 5e-3)):
    """Largest discrete Laplacian relative to ``max |u|`` for each step."""
    scale = float(np.max(np.abs(u(points))))
    return [float(np.max(np.abs(fd_laplacian(u, points, h)))) / max(scale, 1e-300) for h in steps]


def suite_harmonic(u, dim, params, q, seed):
    pts = _samples(dim, params.get("samples", 64), seed)
    r1, r2 = fd_harmonic_residuals(u, pts)
    # a harmonic field leaves only the O(h^2) truncation error: halving the step divides it by four
    ok = r2 <= 1e-9 or 3.0 <= r1 / r2 <= 5.0
    return ("harmonic" if ok else "not-harmonic"), r2, f"ratio={r1 / r2 if r2 > 0 else math.inf:.3g}"


def suite_superharmonic(u, dim, params, q, seed):
    pts = _samples(dim, params.get("samples", 64), seed)
    h = params.get("step", 1e-3)
    minus_lap = -fd_laplacian(u, pts, h)
    scale = float(np.max(np.abs(minus_lap)))
    worst = float(np.min(minus_lap))
    ok = worst >= -1e-6 * max(scale, 1.0)
    detail = f"min(-Lap u)={worst:.6g}"
    if u.laplacian is not None:
        exact = -u.laplacian(pts)
        rel = float(np.max(np.abs(minus_lap - exact) / np.maximum(np.abs(exact), 1e-300)))
        ok = ok and rel <= 1e-3 and float(np.min(exact)) >= 0
        detail += f" rel_err_vs_exact={rel:.3g}"
    return ("superharmonic" if ok else "not-superharmonic"), worst, detail


def boundary_l1(u, delta, q=DEFAULT_SPEC, breaks=()):
    """``int |u|`` over ``{|x'| < 1, 0 < x_N < 1}`` minus the half ball ``|x| < delta``.

    Uses dyadic spherical shells about the origin, each clipped to the
    cylinder.
    """
    n = u.dim
    origin = np.zeros(n)

    def reach(d):
        # distance from 0 to the cylinder boundary along d (0 below the plane)
        tang = np.linalg.norm(d[:, :-1], axis=-1)
        with np.errstate(divide="ignore"):
            r = np.minimum(np.where(tang > 0, 1.0 / tang, np.inf), np.where(d[:, -1] > 0, 1.0 / d[:, -1], 0.0))
        return np.where(d[:, -1] > 0, r, 0.0)

    hb = sorted({0.0, 1.0 / math.sqrt(2.0), *breaks})
    total = 0.0
    r = float(delta)
    rmax = math.sqrt(2.0)
    while r < rmax:
        lo_r, hi_r = r, 2.0 * r
        # directions below the plane get an empty radial range away from the origin
        shell = RayShell(
            origin,
            lambda d, a=lo_r: np.where(d[:, -1] > 0, np.minimum(a, reach(d)), a),
            lambda d, a=lo_r, b=hi_r: np.where(d[:, -1] > 0, np.minimum(b, reach(d)), a),
            height_breaks=hb,
        )
        est, _ = integrate(lambda y: np.abs(np.asarray(u(y), dtype=float)), [shell], q)
        total += float(est)
        r = hi_r
    return total


def suite_boundary_l1(u, dim, params, q, seed):
    deltas = params.get("deltas", [1e-1, 1e-2, 1e-3])
    # the cone x_N^2 = |x|^2 / N is where the unotl1c field changes sign
    vals = [boundary_l1(u, d, q, [1.0 / math.sqrt(dim)]) for d in deltas]
    inc = np.diff(vals)
    # divergence evidence: the integral keeps growing by a non-shrinking amount per decade
    ok = bool(np.all(inc > 0) and np.all(inc[1:] >= 0.5 * inc[:-1]))
    ratio = vals[-1] / vals[0] if vals[0] > 0 else math.inf
    detail = " ".join(f"I({d:g})={v:.6g}" for d, v in zip(deltas, vals))
    return ("diverges" if ok else "bounded"), ratio, detail


def _profile(params):
    p = params.get("psi", _PSI)
    return BoundaryProfile(p["kind"], p["center"], p["width"])


def suite_trace(u, dim, params, q, seed):
    psi = _profile(params)
    rep = lim_trace(u, psi, q=q, target=params.get("target"))
    if rep.diverges:
        return "diverges", rep.values[-1], "monotone growth across the ladder"
    tol = params.get("tol", 1e-2)
    if rep.target is not None and rep.target_error > tol:
        return "wrong-limit", rep.limit, f"limit={rep.limit:.6g} target={rep.target:.6g}"
    return "converges", rep.limit, f"limit={rep.limit:.6g} err={rep.error:.3g}"


def suite_trace_bound(u, dim, params, q, seed):
    psi = _profile(params)
    dpsi = psi.max_gradient()
    worst = 0.0
    for e in params.get("ladder", (1e-1, 1e-2, 1e-3, 1e-4)):
        t = boundary_pairing(u, psi, e, q)
        worst = max(worst, abs(t) / (2.0 * math.sqrt(e) * dpsi))
    return ("holds" if worst <= 1.0 else "violated"), worst, "max |T| / bound"


def suite_trace_lower(u, dim, params, q, seed):
    psi = _profile(params)
    psi0 = float(psi(np.zeros((1, 1)))[0])
    worst = math.inf
    for e in params.get("ladder", (1e-2, 1e-3, 1e-4)):
        t = boundary_pairing(u, psi, e, q)
        worst = min(worst, t / (psi0 / (4.0 * math.sqrt(e))))
    return ("holds" if worst >= 1.0 else "violated"), worst, "min T / bound"


def _mirror_green(x, y):
    # fundamental solution minus its mirror image, from the textbook formula
    n = x.shape[-1]
    yb = y.copy()
    yb[..., -1] = -yb[..., -1]
    r1 = np.linalg.norm(x - y, axis=-1)
    r2 = np.linalg.norm(x - yb, axis=-1)
    if n == 2:
        return np.log(r2 / r1) / (2.0 * math.pi)
    c = 1.0 / ((n - 2) * (2.0 * math.pi ** (n / 2) / math.gamma(n / 2)))
    return c * (r1 ** (2 - n) - r2 ** (2 - n))


def suite_reference(u, dim, params, q, seed):
    pts = _samples(dim, params.get("samples", 16), seed)
    got = np.asarray(u(pts), dtype=float)
    if u.name == "P[gauss]":
        if dim == 2:
            ref = wofz(pts[:, 0] + 1j * pts[:, 1]).real
        else:
            d = _gauss_density(dim).densities[0]
            ref = np.array([_poisson_adaptive(d, p, q.with_(rel_tol=1e-9)) for p in pts])
    elif u.name == "G[delta]":
        ref = _mirror_green(pts, _center(dim)[None, :])
    else:
        raise HalfSpaceError(f"no reference formula for {u.name!r}")
    err = float(np.max(np.abs(got - ref) / np.abs(ref)))
    return ("matches" if err <= params.get("tol", 1e-6) else "differs"), err, "max relative error"


def _lift_probes(dim, count, seed):
    """Centers and radii in ``R^{N+2}`` whose spheres stay clear of the singular sets.

    Lifts of positive fields blow up on ``|xi_bar| = 0``; the lift of the
    unit mass at ``(0, ..., 0, 1)`` also blows up on ``{xi' = 0, |xi_bar| = 1}``.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        c = rng.uniform(-1.5, 1.5, size=dim + 2)
        bar = float(np.linalg.norm(c[dim - 1:]))
        if bar < 0.3:
            continue
        r = float(rng.uniform(0.1, 0.8)) * bar
        pole = math.hypot(float(np.linalg.norm(c[: dim - 1])), bar - 1.0)
        if abs(pole - r) < 0.2 * r:
            continue
        out.append((c, r))
    return out


def suite_huber_mean(u, dim, params, q, seed):
    v = lift(u)
    worst = -math.inf
    for c, r in _lift_probes(dim, params.get("probes", 20), seed):
        m = spherical_mean(v, c, r, q)
        centre = float(v(c[None, :])[0])
        excess = (m.mean - centre) / (abs(centre) + 1e-300)
        slack = (4.0 * m.stderr + 1e-9) / (abs(centre) + 1e-300)
        worst = max(worst, excess - slack)
    return ("holds" if worst <= 0 else "violated"), worst, "max (mean - center - 4 stderr) / center"


def suite_huber_annulus(u, dim, params, q, seed):
    x = _center(dim)
    rows = []
    try:
        a = annulus_comparison(u, 0.0, x, 4.0, 0.5, q)
        rows.append(a.lhs >= a.rhs * (1 - 10 * q.rel_tol) and a.holds)
    except PreconditionError:
        pass
    try:
        b = annulus_split_bound(u, x, 8.0, 0.8, q)
        rows.append(b.holds)
    except PreconditionError:
        pass
    ok = all(rows)
    return ("holds" if ok else "violated"), float(len(rows)), "checks run"


SUITE_RUNNERS = {
    "ring": suite_ring,
    "harmonic": suite_harmonic,
    "superharmonic": suite_superharmonic,
    "boundary-l1": suite_boundary_l1,
    "trace": suite_trace,
    "trace-bound": suite_trace_bound,
    "trace-lower": suite_trace_lower,
    "reference": suite_reference,
    "huber-mean": suite_huber_mean,
    "huber-annulus": suite_huber_annulus,
}


# ---------------------------------------------------------------------------
# running the registry


@dataclass
class CorpusRow:
    entry: str
    dim: int
    suite: str
    params: str
    expected: str
    observed: str
    ok: bool
    metric: float
    detail: str
    claim: str


@dataclass
class CorpusReport:
    dim: int
    seed: int
    rows: list

    @property
    def ok(self):
        return all(r.ok for r in self.rows)

    @property
    def failures(self):
        return [r for r in self.rows if not r.ok]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["entry", "dim", "suite", "params", "expected", "observed", "ok", "metric", "detail", "claim"])
        for r in self.rows:
            w.writerow([r.entry, r.dim, r.suite, r.params, r.expected, r.observed, int(r.ok), repr(float(r.metric)),
                        r.detail, r.claim])
        return buf.getvalue()

    def to_dict(self):
        def num(v):
            v = float(v)
            return v if math.isfinite(v) else str(v)

        return {
            "version": CORPUS_VERSION,
            "dim": self.dim,
            "seed": self.seed,
            "ok": self.ok,
            "rows": [dict(r.__dict__, metric=num(r.metric)) for r in self.rows],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _param_text(params):
    keep = {k: v for k, v in params.items() if k not in ("psi",)}
    return json.dumps(keep, sort_keys=True, separators=(",", ":"))


def run_expectation(entry, exp, dim, q=DEFAULT_SPEC, seed=0):
    u = entry.field(dim)
    try:
        observed, metric, detail = SUITE_RUNNERS[exp.suite](u, dim, exp.params, q, seed)
    except QuadratureError as exc:
        observed, metric, detail = "quadrature-failure", math.nan, str(exc)
    return CorpusRow(entry.name, dim, exp.suite, _param_text(exp.params), exp.expected, observed,
                     observed == exp.expected, metric, detail, exp.claim)


def run_corpus(dim, q=DEFAULT_SPEC, seed=0, names=None, suites=None, progress=None):
    """Run every expectation of every entry defined in dimension ``dim``.

    Parameters
    ----------
    names, suites : iterable of str, optional
        Restrict to these entries or suites.
    progress : callable, optional
        Called with each finished :class:`CorpusRow`.

    Returns
    -------
    CorpusReport
    """
    rows = []
    for entry in registry():
        if dim not in entry.dims or (names is not None and entry.name not in names):
            continue
        for exp in entry.expectations:
            if suites is not None and exp.suite not in suites:
                continue
            row = run_expectation(entry, exp, dim, q, seed)
            rows.append(row)
            if progress is not None:
                progress(row)
    return CorpusReport(dim, seed, rows)
