"""
Command-line front end.

Every subcommand builds a report (CSV or JSON) and exits with

* ``0`` when every expected verdict is met,
* ``1`` on a verdict failure,
* ``2`` on invalid input,
* ``3`` when adaptive quadrature does not converge.

Reports are written atomically and only on exits 0 and 1.  Reports contain
no timings or host data, so identical arguments give identical bytes.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import corpus as corpus_mod
from .errors import HalfSpaceError, QuadratureError
from .estimates import audit
from .fields import expression_field
from .geometry import check_dim
from .huber import annulus_comparison, annulus_split_bound
from .kernels import fundamental, grad_green, green, poisson
from .measures import load_measure, zero_measure
from .potentials import RepresentationTriple, represent
from .quadrature import DEFAULT_SPEC
from .rings import TAGS, scan
from .weakform import PROFILE_KINDS, BoundaryProfile, lim_trace, weak_residual

EXIT_OK, EXIT_VERDICT, EXIT_INPUT, EXIT_QUADRATURE = 0, 1, 2, 3

CONDITIONS = {
    "r": "(R)",
    "r-plus": "(R+)",
    "r-plus-0": "(R+0)",
    "ball-limit": "ball-limit",
    "green-ring": "green-ring",
    "ring-equivalent": "ring-equivalent",
}
for _tag in TAGS:
    CONDITIONS[_tag] = _tag


class InputError(Exception):
    """Invalid command-line input (exit code 2)."""


class Report:
    """Rows for CSV plus a JSON document, and the process exit code."""

    def __init__(self, header, rows, document, code=EXIT_OK, summary="", plain=None):
        self.plain = plain
        self.header = header
        self.rows = rows
        self.document = document
        self.code = code
        self.summary = summary

    def render(self, fmt):
        if fmt == "json":
            return json.dumps(self.document, indent=2, sort_keys=True, default=_json_default) + "\n"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else str(v)


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# argument helpers


def parse_vector(text, size=None, name="vector"):
    try:
        v = [float(s) for s in str(text).split(",") if s.strip() != ""]
    except ValueError:
        raise InputError(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if size is not None and len(v) != size:
        raise InputError(f"--{name}: expected {size} coordinates, got {len(v)}")
    if not all(math.isfinite(c) for c in v):
        raise InputError(f"--{name}: coordinates must be finite")
    return np.array(v)


def _default_point(dim):
    x = np.zeros(dim)
    x[-1] = 1.0
    return x


def _points(args, dim):
    if not args.x:
        return [_default_point(dim)]
    pts = [parse_vector(s, dim, "x") for s in args.x]
    if any(p[-1] <= 0 for p in pts):
        raise InputError("--x must be an interior point (last coordinate > 0)")
    return pts


def _measures(args, dim):
    nu, mu = zero_measure(dim, "boundary"), zero_measure(dim, "interior")
    for path in args.measure or ():
        if not os.path.isfile(path):
            raise InputError(f"--measure: no such file {path!r}")
        m = load_measure(path, dim=dim)
        if m.side == "boundary":
            nu = nu + m
        else:
            mu = mu + m
    return nu, mu


def _field(args, dim, q):
    """The field named by ``--corpus`` or ``--field``, else the representation of the measures."""
    chosen = [s for s in (args.corpus, args.field) if s]
    if len(chosen) > 1:
        raise InputError("give at most one of --corpus and --field")
    if args.corpus:
        try:
            entry = corpus_mod.get_entry(args.corpus)
        except HalfSpaceError as exc:
            raise InputError(str(exc)) from None
        if dim not in entry.dims:
            raise InputError(f"corpus entry {entry.name!r} is defined for dims {list(entry.dims)}")
        return entry.field(dim), f"corpus:{entry.name}"
    if args.field:
        return expression_field(args.field, dim, declared_h=args.h), f"expr:{args.field}"
    nu, mu = _measures(args, dim)
    return represent(RepresentationTriple(args.h or 0.0, nu, mu), q), "represent"


def _spec(args):
    q = DEFAULT_SPEC.with_(seed=args.seed)
    if args.tol is not None:
        if not args.tol > 0:
            raise InputError("--tol must be positive")
        q = q.with_(rel_tol=args.tol)
    return q


# ---------------------------------------------------------------------------
# subcommands


def cmd_kernel(args, dim, q):
    if not args.x or len(args.x) != 1:
        raise InputError("kernel needs exactly one --x")
    x = parse_vector(args.x[0], dim, "x")
    if args.eps < 0:
        raise InputError("--eps must be nonnegative")
    if args.which != "fundamental" and not x[-1] > 0:
        raise InputError("x must lie in the open half-space (x_N > 0)")
    if args.which == "poisson":
        if args.yprime is None:
            raise InputError("--which poisson needs --yprime")
        yp = parse_vector(args.yprime, dim - 1, "yprime")
        vals = [float(poisson(x, yp, args.eps))]
        loc = ",".join(repr(float(c)) for c in yp)
    else:
        if args.y is None:
            raise InputError(f"--which {args.which} needs --y")
        y = parse_vector(args.y, dim, "y")
        if args.which != "fundamental" and y[-1] < 0:
            raise InputError("y must lie in the closed half-space (y_N >= 0)")
        if args.which == "green":
            vals = [float(green(x, y, args.eps))]
        elif args.which == "fundamental":
            vals = [float(fundamental(x, y, args.eps))]
        else:
            vals = [float(v) for v in np.asarray(grad_green(x, y, args.eps)).reshape(-1)]
        loc = ",".join(repr(float(c)) for c in y)
    xs = ",".join(repr(float(c)) for c in x)
    header = ["which", "x", "y", "eps", "component", "value"]
    rows = [[args.which, xs, loc, float(args.eps), k, v] for k, v in enumerate(vals)]
    doc = {"which": args.which, "dim": dim, "x": x.tolist(), "y": [float(c) for c in loc.split(",")],
           "eps": float(args.eps), "value": vals if len(vals) > 1 else vals[0]}
    summary = " ".join(repr(v) for v in vals)
    plain = "".join(repr(v) + "\n" for v in vals)
    return Report(header, rows, doc, EXIT_OK, summary, plain)


def cmd_represent(args, dim, q):
    u, source = _field(args, dim, q)
    pts = _points(args, dim)
    vals = [float(u(p[None, :])[0]) for p in pts]
    header = ["x", "u"]
    rows = [[",".join(repr(float(c)) for c in p), v] for p, v in zip(pts, vals)]
    doc = {"source": source, "dim": dim, "h": u.declared_h,
           "points": [{"x": p.tolist(), "u": _num(v)} for p, v in zip(pts, vals)]}
    return Report(header, rows, doc, EXIT_OK, " ".join(repr(v) for v in vals))


def cmd_ring_scan(args, dim, q):
    cond = CONDITIONS.get(args.condition)
    if cond is None:
        raise InputError(f"--condition must be one of {sorted(CONDITIONS)}")
    u, source = _field(args, dim, q)
    x = _points(args, dim)[0]
    h = args.h if args.h is not None else (u.declared_h or 0.0)
    rep = scan(u, h, x, cond, R0=args.r0, levels=args.levels, q=q)
    header = ["k", "R", "I", "cumulative_min"]
    rows = [[k, R, v, m] for k, (R, v, m) in enumerate(zip(rep.radii, rep.values, rep.cumulative_min))]
    doc = dict(rep.to_dict(), source=source, expected=args.expect)
    code = EXIT_OK if args.expect == "any" or rep.verdict == args.expect else EXIT_VERDICT
    if rep.notes and code != EXIT_OK:
        code = EXIT_QUADRATURE
    return Report(header, rows, doc, code, f"{cond} {rep.verdict} slope={rep.slope:.4g}")


def cmd_weak_residual(args, dim, q):
    u, source = _field(args, dim, q)
    nu, mu = _measures(args, dim)
    rep = weak_residual(u, mu, nu, q=q, mode=args.mode)
    header = ["test", "lhs", "interior", "boundary", "residual", "scale"]
    rows = [list(r) for r in rep.rows()]
    doc = dict(rep.to_dict(), source=source, max_allowed=args.max_residual)
    ok = rep.max_residual <= args.max_residual
    return Report(header, rows, doc, EXIT_OK if ok else EXIT_VERDICT, f"max residual {rep.max_residual:.3g}")


def _profile(args, dim):
    center = parse_vector(args.psi_center, dim - 1, "psi-center") if args.psi_center else np.zeros(dim - 1)
    try:
        return BoundaryProfile(args.psi_kind, center, args.psi_width)
    except HalfSpaceError as exc:
        raise InputError(str(exc)) from None


def cmd_trace_scan(args, dim, q):
    u, source = _field(args, dim, q)
    psi = _profile(args, dim)
    ladder = [float(s) for s in parse_vector(args.ladder, name="ladder")]
    rep = lim_trace(u, psi, ladder, q, target=args.target)
    header = ["eps", "T"]
    rows = [[e, v] for e, v in zip(rep.ladder, rep.values)]
    doc = dict(rep.to_dict(), source=source, expected=args.expect)
    observed = "diverges" if rep.diverges else "converges"
    ok = args.expect in ("any", observed)
    if ok and args.target is not None and not rep.diverges:
        ok = rep.target_error <= args.trace_tol
    summary = f"{observed} limit={rep.limit:.10g}"
    return Report(header, rows, doc, EXIT_OK if ok else EXIT_VERDICT, summary)


def cmd_huber_check(args, dim, q):
    u, source = _field(args, dim, q)
    params = {"probes": args.probes}
    verdict, worst, _ = corpus_mod.suite_huber_mean(u, dim, params, q, args.seed)
    header = ["check", "lhs", "rhs", "holds"]
    rows = [["spherical-means", worst, 0.0, verdict == "holds"]]
    x = _points(args, dim)[0]
    c = args.h if args.h is not None else 0.0
    for label, fn in (
        ("annulus-comparison", lambda: annulus_comparison(u, c, x, args.R, args.gamma, q)),
        ("annulus-split-bound", lambda: annulus_split_bound(u, x, args.R, args.tau, q)),
    ):
        try:
            r = fn()
        except HalfSpaceError as exc:
            rows.append([label, math.nan, math.nan, "skipped: " + str(exc)])
            continue
        rows.append([label, r.lhs, r.rhs, r.holds])
    ok = all(r[3] is True for r in rows if not isinstance(r[3], str))
    doc = {"source": source, "dim": dim, "checks": [dict(zip(header, [r[0], _num(r[1]), _num(r[2]), r[3]])) for r in rows]}
    return Report(header, rows, doc, EXIT_OK if ok else EXIT_VERDICT, "holds" if ok else "violated")


def cmd_estimates_audit(args, dim, q):
    rep = audit(dim, args.samples, args.seed)
    header = ["dim", "check", "violations", "worst"]
    rows = [[r["dim"], r["check"], r["violations"], r["worst"]] for r in rep.rows()]
    doc = {"dim": dim, "samples": args.samples, "seed": args.seed,
           "checks": [dict(r, worst=_num(r["worst"])) for r in rep.rows()], "ok": rep.ok}
    total = sum(rep.violations.values())
    return Report(header, rows, doc, EXIT_OK if rep.ok else EXIT_VERDICT, f"{total} violations")


def cmd_corpus_run(args, dim, q):
    names = set(args.entry) if args.entry else None
    suites = set(args.suite) if args.suite else None
    if names:
        known = {e.name for e in corpus_mod.registry()}
        if names - known:
            raise InputError(f"unknown corpus entries {sorted(names - known)}")
    if suites and suites - set(corpus_mod.SUITES):
        raise InputError(f"unknown suites {sorted(suites - set(corpus_mod.SUITES))}")
    progress = None
    if not args.quiet:
        def progress(row):
            print(f"{'ok  ' if row.ok else 'FAIL'} {row.entry} {row.suite} {row.observed}", file=sys.stderr)
    rep = corpus_mod.run_corpus(dim, q, args.seed, names, suites, progress)
    code = EXIT_OK
    if not rep.ok:
        quad = any(r.observed == "quadrature-failure" for r in rep.failures)
        code = EXIT_QUADRATURE if quad else EXIT_VERDICT
    text = rep.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    summary = f"{len(rep.rows) - len(rep.failures)}/{len(rep.rows)} expectations met"
    return Report(rows[0], rows[1:], rep.to_dict(), code, summary)


COMMANDS = {
    "kernel": cmd_kernel,
    "represent": cmd_represent,
    "ring-scan": cmd_ring_scan,
    "weak-residual": cmd_weak_residual,
    "trace-scan": cmd_trace_scan,
    "huber-check": cmd_huber_check,
    "estimates-audit": cmd_estimates_audit,
    "corpus-run": cmd_corpus_run,
}


# ---------------------------------------------------------------------------
# parser


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--dim", type=int, default=2, help="dimension N (default 2)")
    p.add_argument("--tol", type=float, default=None, help="relative quadrature tolerance (default 1e-6)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--measure", action="append", default=[], metavar="PATH",
                   help="measure document; interior or boundary is read from the file (repeatable)")
    p.add_argument("--quiet", action="store_true", help="suppress the summary line on stderr")
    return p


def _field_args(p):
    p.add_argument("--corpus", default=None, help="corpus entry name")
    p.add_argument("--field", default=None, help="field expression in x1..xN, |x|, exp, log, ...")
    p.add_argument("--h", type=float, default=None, help="slope of the linear term h x_N")
    p.add_argument("--x", action="append", default=[], help="point x1,...,xN (repeatable)")


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="halfspace", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, aliases=[name.replace("-", "_")] if "-" in name else [],
                              parents=[common], help=help_)

    p = add("kernel", "evaluate a kernel at one pair of points")
    p.add_argument("--x", action="append", default=[])
    p.add_argument("--y", default=None)
    p.add_argument("--yprime", default=None)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--which", choices=("green", "poisson", "grad", "fundamental"), default="green")

    p = add("represent", "evaluate h x_N + P[nu] + G[mu] (or a corpus/expression field) at points")
    _field_args(p)

    p = add("ring-scan", "dyadic scan of a ring integral")
    _field_args(p)
    p.add_argument("--condition", default="r-plus", help=f"one of {sorted(CONDITIONS)}")
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--r0", type=float, default=None)
    p.add_argument("--expect", default="satisfied", choices=("satisfied", "not-satisfied", "inconclusive", "any"))

    p = add("weak-residual", "weak formulation residuals over the test-function battery")
    _field_args(p)
    p.add_argument("--mode", choices=("equality", "inequality"), default="equality")
    p.add_argument("--max-residual", type=float, default=1e-3)

    p = add("trace-scan", "boundary pairings along an eps ladder and their limit")
    _field_args(p)
    p.add_argument("--psi-kind", choices=PROFILE_KINDS, default="bump")
    p.add_argument("--psi-center", default=None)
    p.add_argument("--psi-width", type=float, default=1.0)
    p.add_argument("--ladder", default="0.1,0.01,0.001,0.0001")
    p.add_argument("--target", type=float, default=None)
    p.add_argument("--trace-tol", type=float, default=1e-3)
    p.add_argument("--expect", default="any", choices=("converges", "diverges", "any"))

    p = add("huber-check", "spherical means of the lift and the annulus inequalities")
    _field_args(p)
    p.add_argument("--probes", type=int, default=20)
    p.add_argument("--R", type=float, default=8.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--tau", type=float, default=0.8)

    p = add("estimates-audit", "symmetry, monotonicity and explicit kernel bounds on random samples")
    p.add_argument("--samples", type=int, default=1000)

    p = add("corpus-run", "run every registry expectation")
    p.add_argument("--entry", action="append", default=[], help="restrict to this entry (repeatable)")
    p.add_argument("--suite", action="append", default=[], help="restrict to this suite (repeatable)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    command = args.command.replace("_", "-")
    try:
        dim = check_dim(args.dim)
        q = _spec(args)
        with np.errstate(all="ignore"):
            report = COMMANDS[command](args, dim, q)
    except QuadratureError as exc:
        print(f"error: quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except (InputError, HalfSpaceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = report.render(args.format)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(report.plain if report.plain is not None and args.format == "csv" else text)
        report.summary = "" if report.plain is not None else report.summary
    if not args.quiet and report.summary:
        print(report.summary, file=sys.stderr)
    return report.code


if __name__ == "__main__":
    sys.exit(main())
