"""Command-line front end: ``kahler-pinch <command> [options]``.

Commands
--------
analyze     curvature summaries (R, |E|, |B|) at chosen points
identities  symmetry, trace, Bochner-route, Codazzi and Weitzenböck checks
fuzz        seeded random testing of the pointwise inequalities
pinch       evaluate pinching theorems on a model
report      analyze + identities + every applicable theorem for one model

Exit status is 0 when every check passes, 1 when a mathematical check fails
(or a theorem/model pair is classified as a contradiction) and 2 for input
or usage errors.  ``--json`` writes a report that is byte-identical across
runs with the same arguments; wall-clock timings go to a sidecar file
``<json>.timing.json`` so they do not disturb that property.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import json
import math
import sys
import time
from importlib import resources

import numpy as np

from . import __version__
from .chart import (
    ChartError,
    codazzi_residual,
    curvature_at,
    load_metric_json,
    metric_compatibility_residual,
    package_invariants,
)
from .curvature_analysis import (
    bochner_from_E,
    bochner_from_ricci,
    weitzenbock_residual_B,
    weitzenbock_residual_E,
)
from .expressions import ExpressionError
from .inequalities import FUZZERS, InequalityError, bkn_gap, kato_field_gap
from .models import BUILDERS, ModelError, ModelSpec, _measure_flags, make_model
from .pinching import (
    THEOREMS,
    PinchError,
    check_dimension,
    evaluate_theorem,
    model_grid,
    summarize_grid,
)
from .quadrature import QuadratureError
from .reports import TOL_ALGEBRAIC, TOL_FD, GapReport, serialize_witness, skipped
from .tensor_core import TensorError, check_kahler_symmetries

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
WEITZENBOCK_TOL = 1e-8
METRIC_COMPAT_TOL = 1e-8
CODAZZI_TOL = 1e-6
BOCHNER_ROUTE_TOL = 1e-12

INPUT_ERRORS = (ModelError, ChartError, ExpressionError, PinchError, QuadratureError,
                TensorError, OSError)


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# sources: zoo models or metric files


class Source:
    """What a command runs on: a zoo model or a chart loaded from a metric file."""

    def __init__(self, chart, model: ModelSpec | None, ref: dict):
        self.chart = chart
        self.model = model
        self.ref = ref
        self._flags = None

    @property
    def m(self) -> int:
        return self.chart.m

    def flags(self, seed: int) -> dict:
        if self.model is not None:
            return dict(self.model.flags)
        if self._flags is None:
            measured, _ = _measure_flags(self.chart, self.random_points(5, seed))
            self._flags = measured
        return self._flags

    def random_points(self, n: int, seed: int) -> np.ndarray:
        if self.model is not None:
            return self.model.sample_points(n, seed)
        dom = self.chart.domain
        lo, hi = dom.bounds()
        margin = self.chart.fd.stencil_radius() * 4 + self.chart.stencil_margin()
        lo = np.maximum(lo, -0.5) + margin
        hi = np.minimum(hi, 0.5) - margin
        if np.any(hi <= lo):
            raise UsageError("metric domain too small to sample points away from its edges")
        rng = np.random.default_rng([seed, self.m, n])
        pts = []
        while len(pts) < n:
            x = lo + (hi - lo) * rng.random(lo.size)
            z = x[:self.m] + 1j * x[self.m:]
            if dom.contains(z[None], margin)[0]:
                pts.append(z)
        return np.array(pts)


def _model_params(args) -> dict:
    builder = BUILDERS.get(args.model)
    if builder is None:
        raise ModelError(f"unknown model {args.model!r}; choose from {sorted(BUILDERS)}")
    accepted = inspect.signature(builder).parameters
    params = {}
    for key in ("m", "m1", "m2", "a", "b", "scale", "eps"):
        val = getattr(args, key, None)
        if val is None:
            continue
        if key not in accepted:
            raise UsageError(f"model {args.model} does not take --{key}")
        params[key] = val
    return params


def resolve_source(args) -> Source:
    if args.model and args.metric:
        raise UsageError("give either --model or --metric, not both")
    if args.metric:
        chart = load_metric_json(args.metric)
        if args.mode:
            chart = chart.with_mode(args.mode)
        return Source(chart, None, {"metric_file": args.metric, "m": chart.m,
                                    "derivative_mode": chart.derivative_mode})
    if not args.model:
        raise UsageError("this command needs --model or --metric")
    params = _model_params(args)
    if args.mode:
        params["derivative_mode"] = args.mode
    model = make_model(args.model, **params)
    ref = {"model": model.name, "m": model.m, "params": serialize_witness(model.params),
           "derivative_mode": model.chart.derivative_mode}
    return Source(model.chart, model, ref)


def parse_points(text: str | None, source: Source, seed: int, npoints: int) -> np.ndarray:
    """``origin``, ``random`` or explicit points ``"0.1+0.2j,0;0.3,0"``."""
    if text is None or text == "random":
        return source.random_points(npoints, seed)
    if text == "origin":
        return np.zeros((1, source.m), dtype=complex)
    pts = []
    for chunk in text.split(";"):
        try:
            coords = [complex(c.strip().replace(" ", "")) for c in chunk.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse point {chunk!r}") from None
        if len(coords) != source.m:
            raise UsageError(f"point {chunk!r} has {len(coords)} coordinates, expected {source.m}")
        pts.append(coords)
    pts = np.array(pts, dtype=complex)
    inside = source.chart.domain.contains(pts, source.chart.stencil_margin())
    if not np.all(inside):
        raise UsageError(f"point {pts[np.argmin(inside)].tolist()} is outside the chart domain")
    return pts


def _point_json(p) -> dict:
    return {"re": np.real(p).tolist(), "im": np.imag(p).tolist()}


# ---------------------------------------------------------------------------
# sections


def cmd_analyze(source: Source, points: np.ndarray) -> dict:
    rows = []
    for p in points:
        pkg = curvature_at(source.chart, p)
        rows.append({"point": _point_json(p), "scalar": float(pkg.scalar),
                     "E_norm": pkg.E_norm, "B_norm": pkg.B_norm})
    return {"rows": rows, "gaps": []}


def _weitzenbock_rows(pkg, flags: dict) -> list:
    out = []
    if flags.get("parallel_E"):
        res = weitzenbock_residual_E(pkg, parallel_E=True)
        scaled = abs(res) / (1.0 + pkg.E_norm ** 3)
        out.append(GapReport("weitzenbock_E", -scaled, scaled, 0.0, WEITZENBOCK_TOL,
                             rung="algebraic", witness={"residual": res}))
    else:
        out.append(skipped("weitzenbock_E", "E not flagged parallel", "algebraic"))
    if flags.get("einstein") and flags.get("parallel_B"):
        res = weitzenbock_residual_B(pkg)
        scaled = abs(res) / (1.0 + pkg.B_norm ** 3)
        out.append(GapReport("weitzenbock_B", -scaled, scaled, 0.0, WEITZENBOCK_TOL,
                             rung="algebraic", witness={"residual": res}))
    else:
        out.append(skipped("weitzenbock_B", "not an Einstein chart with parallel B", "algebraic"))
    return out


def _safe(name: str, fn) -> GapReport:
    try:
        return fn()
    except (InequalityError, ChartError, ValueError) as exc:
        return skipped(name, str(exc))


def identity_reports(source: Source, p, flags: dict, tols: dict | None = None) -> list:
    chart = source.chart
    pkg = curvature_at(chart, p)
    tols = tols or {"algebraic": TOL_ALGEBRAIC, "fd": TOL_FD}
    tol = tols["algebraic"] if pkg.mode == "exact" else tols["fd"]
    rung = "algebraic" if pkg.mode == "exact" else "fd"
    reports = [check_kahler_symmetries(pkg.riemann, tol=tol)]
    reports += package_invariants(pkg, tol)
    b1 = bochner_from_ricci(pkg).components
    b2 = bochner_from_E(pkg).components
    rel = float(np.max(np.abs(b1 - b2))) / (1.0 + float(np.max(np.abs(b1))))
    reports.append(GapReport("bochner_routes", -rel, rel, 0.0, BOCHNER_ROUTE_TOL, rung=rung))
    compat = metric_compatibility_residual(chart, p)
    reports.append(GapReport("metric_compatibility", -compat, compat, 0.0, METRIC_COMPAT_TOL,
                             rung="fd"))
    if flags.get("constant_scalar"):
        cod = codazzi_residual(chart, p)
        reports.append(GapReport("codazzi_E", -cod, cod, 0.0, CODAZZI_TOL, rung="fd"))
        reports.append(_safe("kato_field", lambda: kato_field_gap(chart, p)))
    else:
        reports.append(skipped("codazzi_E", "scalar curvature not constant"))
        reports.append(skipped("kato_field", "scalar curvature not constant"))
    if flags.get("einstein"):
        reports.append(_safe("bkn", lambda: bkn_gap(chart, p)))
    else:
        reports.append(skipped("bkn", "not an Einstein chart"))
    reports += _weitzenbock_rows(pkg, flags)
    return reports


def cmd_identities(source: Source, points: np.ndarray, seed: int,
                   tols: dict | None = None) -> dict:
    flags = source.flags(seed)
    gaps = []
    for i, p in enumerate(points):
        for rep in identity_reports(source, p, flags, tols):
            d = rep.to_dict()
            d["point_index"] = i
            gaps.append(d)
    return {"rows": [{"point": _point_json(p)} for p in points], "gaps": gaps}


def cmd_fuzz(suite: str, m: int, samples: int, seed: int, tol: float) -> dict:
    names = sorted(FUZZERS) if suite == "all" else [suite]
    out = []
    for name in names:
        if name not in FUZZERS:
            raise UsageError(f"unknown fuzz suite {name!r}; choose from {sorted(FUZZERS)} or all")
        out.append(FUZZERS[name](m, samples, seed, tol).to_dict())
    return {"fuzz": out}


def applicable_theorems(m: int) -> list:
    ids = []
    for tid in THEOREMS:
        try:
            check_dimension(tid, m)
        except PinchError:
            continue
        ids.append(tid)
    return ids


def cmd_pinch(theorems: list, model: ModelSpec, nodes: int, trunc_radius, yamabe) -> dict:
    for tid in theorems:
        check_dimension(tid, model.m)
    grid = model_grid(model, nodes, trunc_radius)
    summary = summarize_grid(model, grid)
    return {"verdicts": [evaluate_theorem(tid, model, summary=summary, Lambda=yamabe).to_dict()
                         for tid in theorems]}


# ---------------------------------------------------------------------------
# report assembly and output


def _normalize(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats rejected."""
    obj = serialize_witness(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite value in report: {obj}")
    if isinstance(obj, dict):
        return {k: _normalize(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_normalize(v) for v in obj]
    return obj


def load_schema() -> dict:
    text = resources.files("kahler_pinch").joinpath("run_report.schema.json").read_text("utf-8")
    return json.loads(text)


def validate_report(report: dict):
    import jsonschema

    jsonschema.validate(report, load_schema())


def report_status(report: dict) -> bool:
    ok = all(g["pass"] for g in report["gaps"])
    ok &= all(f["pass"] for f in report["fuzz"])
    ok &= all(v["consistency"] != "paper-contradiction" for v in report["verdicts"])
    return ok


def _fmt(x, width=12) -> str:
    if x is None:
        return "-".rjust(width)
    if isinstance(x, bool):
        return str(x).rjust(width)
    if isinstance(x, float):
        return f"{x:.4e}".rjust(width)
    return str(x).rjust(width)


def render_table(report: dict) -> str:
    lines = [f"kahler-pinch {report['tool_version']}  command={report['command']}  "
             f"seed={report['seed']}  source={json.dumps(report['source'], sort_keys=True)}"]
    if report["analysis"]:
        lines.append("")
        lines.append(f"{'point':>6}{'R':>14}{'|E|':>14}{'|B|':>14}")
        for i, row in enumerate(report["analysis"]):
            if "scalar" in row:
                lines.append(f"{i:>6}{_fmt(row['scalar'], 14)}{_fmt(row['E_norm'], 14)}"
                             f"{_fmt(row['B_norm'], 14)}")
    if report["gaps"]:
        lines.append("")
        lines.append(f"{'check':<22}{'pt':>4}{'value':>13}{'tol':>11}  status")
        for g in report["gaps"]:
            lines.append(f"{g['name']:<22}{g.get('point_index', ''):>4}{_fmt(g['lhs'], 13)}"
                         f"{g['tol']:>11.1e}  {g['status']}")
    if report["fuzz"]:
        lines.append("")
        lines.append(f"{'suite':<18}{'m':>3}{'samples':>9}{'min gap':>13}{'min ratio':>13}  result")
        for f in report["fuzz"]:
            lines.append(f"{f['name']:<18}{f['m']:>3}{f['samples']:>9}{_fmt(f['min_gap'], 13)}"
                         f"{_fmt(f['min_ratio'], 13)}  {'pass' if f['pass'] else 'FAIL'}")
    if report["verdicts"]:
        lines.append("")
        lines.append(f"{'theorem':<8}{'lhs':>13}{'threshold':>13}{'margin':>13}  consistency")
        for v in report["verdicts"]:
            lines.append(f"{v['theorem_id']:<8}{_fmt(v['lhs'], 13)}{_fmt(v['threshold'], 13)}"
                         f"{_fmt(v['margin'], 13)}  {v['consistency']}"
                         + (f" ({v['reason']})" if v["consistency"] == "inconclusive" else ""))
    lines.append("")
    lines.append(f"status: {report['status']}")
    return "\n".join(lines)


CSV_FIELDS = ["kind", "name", "point_index", "m", "lhs", "rhs", "gap", "tol", "status"]


def write_csv(report: dict, path: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        m = report["source"].get("m", "")
        for g in report["gaps"]:
            w.writerow({"kind": "gap", "name": g["name"], "point_index": g.get("point_index", ""),
                        "m": m, "lhs": g["lhs"], "rhs": g["rhs"], "gap": g["gap"],
                        "tol": g["tol"], "status": g["status"]})
        for f in report["fuzz"]:
            w.writerow({"kind": "fuzz", "name": f["name"], "point_index": "", "m": f["m"],
                        "lhs": "", "rhs": "", "gap": f["min_gap"], "tol": f["tol"],
                        "status": "pass" if f["pass"] else "fail"})
        for v in report["verdicts"]:
            w.writerow({"kind": "verdict", "name": v["theorem_id"], "point_index": "",
                        "m": v["m"], "lhs": v["lhs"], "rhs": v["threshold"], "gap": v["margin"],
                        "tol": "", "status": v["consistency"]})


def dump_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("source")
    src.add_argument("--model", choices=sorted(BUILDERS), help="zoo model name")
    src.add_argument("--metric", help="JSON metric-specification file")
    src.add_argument("--m", type=int, help="complex dimension (flat, fubini_study, ...)")
    src.add_argument("--m1", type=int, help="first factor dimension (product_cpm)")
    src.add_argument("--m2", type=int, help="second factor dimension (product_cpm)")
    src.add_argument("--a", type=float, help="first factor scale (products)")
    src.add_argument("--b", type=float, help="second factor scale (products)")
    src.add_argument("--scale", type=float, help="metric scale")
    src.add_argument("--eps", type=float, help="perturbation size (perturbed_fs)")
    src.add_argument("--mode", choices=("exact", "fd"), help="derivative mode override")
    run = common.add_argument_group("run")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--samples", type=int, default=10_000, help="fuzz sample count")
    run.add_argument("--npoints", type=int, default=5, help="random points for pointwise checks")
    run.add_argument("--points", help="origin, random, or 'z1,z2;z1,z2' with Python complex literals")
    run.add_argument("--grid-n", type=int,
                     help="quadrature nodes per coordinate (model default if omitted)")
    run.add_argument("--trunc-radius", type=float, help="cut-off radius for noncompact models")
    run.add_argument("--yamabe", type=float, help="Yamabe constant for integral-norm theorems")
    run.add_argument("--tol-algebraic", type=float, default=TOL_ALGEBRAIC)
    run.add_argument("--tol-fd", type=float, default=TOL_FD)
    out = common.add_argument_group("output")
    out.add_argument("--json", dest="json_path", help="write the JSON report here")
    out.add_argument("--csv", dest="csv_path", help="write flat gap/verdict rows here")
    out.add_argument("--quiet", action="store_true", help="no table on standard output")

    parser = argparse.ArgumentParser(prog="kahler-pinch", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="curvature summaries at points")
    sub.add_parser("identities", parents=[common], help="identity and residual checks")
    fz = sub.add_parser("fuzz", parents=[common], help="seeded inequality fuzzing")
    fz.add_argument("suite", help=f"one of {sorted(FUZZERS)} or all")
    pn = sub.add_parser("pinch", parents=[common], help="pinching-theorem verdicts")
    pn.add_argument("theorem", help=f"one of {list(THEOREMS)} or all")
    sub.add_parser("report", parents=[common], help="full diagnostic for one model")
    return parser


def _arguments_record(args) -> dict:
    skip = {"json_path", "csv_path", "quiet", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(args) -> tuple:
    """Execute a parsed command; returns ``(report, timings)``."""
    timings = {}
    sections = {"analysis": [], "gaps": [], "fuzz": [], "verdicts": []}

    def timed(name, fn):
        t0 = time.perf_counter()
        res = fn()
        timings[name] = time.perf_counter() - t0
        for key in ("gaps", "fuzz", "verdicts"):
            sections[key].extend(res.get(key, []))
        sections["analysis"].extend(res.get("rows", []) if name == "analyze" else [])
        return res

    seed = args.seed
    if args.command == "fuzz":
        if args.m is None:
            raise UsageError("fuzz needs --m")
        if args.m < 2:
            raise UsageError("fuzz needs m >= 2")
        if args.samples < 1:
            raise UsageError("--samples must be positive")
        ref = {"suite": args.suite, "m": args.m}
        timed("fuzz", lambda: cmd_fuzz(args.suite, args.m, args.samples, seed, args.tol_algebraic))
    else:
        if args.command == "pinch" and args.theorem != "all":
            THEOREMS.get(args.theorem) or _unknown_theorem(args.theorem)
            if args.m is not None and args.model is None and args.metric is None:
                check_dimension(args.theorem, args.m)
        source = resolve_source(args)
        ref = source.ref
        if args.command in ("analyze", "report"):
            pts = parse_points(args.points, source, seed, args.npoints)
            timed("analyze", lambda: cmd_analyze(source, pts))
        if args.command in ("identities", "report"):
            pts = parse_points(args.points, source, seed, args.npoints)
            tols = {"algebraic": args.tol_algebraic, "fd": args.tol_fd}
            timed("identities", lambda: cmd_identities(source, pts, seed, tols))
        if args.command in ("pinch", "report"):
            if source.model is None:
                raise UsageError("pinch needs a zoo model (--model)")
            theorem = getattr(args, "theorem", "all")
            ids = applicable_theorems(source.m) if theorem == "all" else [theorem]
            timed("pinch", lambda: cmd_pinch(ids, source.model, args.grid_n, args.trunc_radius,
                                             args.yamabe))
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": args.command,
        "arguments": _arguments_record(args),
        "seed": seed,
        "source": ref,
        "tolerances": {"algebraic": args.tol_algebraic, "fd": args.tol_fd},
        "sections": sorted(timings),
        **sections,
    }
    report = _normalize(report)
    report["status"] = "pass" if report_status(report) else "fail"
    return report, timings


def _unknown_theorem(tid):
    raise UsageError(f"unknown theorem {tid!r}; choose from {list(THEOREMS)} or all")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report, timings = run(args)
    except (UsageError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    validate_report(report)
    if not args.quiet:
        print(render_table(report))
    if args.json_path:
        with open(args.json_path, "w", encoding="utf-8") as fh:
            fh.write(dump_json(report))
        with open(args.json_path + ".timing.json", "w", encoding="utf-8") as fh:
            json.dump({"wall_clock_seconds": timings}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.csv_path:
        write_csv(report, args.csv_path)
    return EXIT_OK if report["status"] == "pass" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
