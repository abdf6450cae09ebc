"""Command-line front end.

Every command prints (or writes with --output) a table. CSV output starts
with '#'-prefixed preamble lines holding the artifact version and the full
run configuration as JSON, followed by an RFC 4180 table. JSON output is a
single object {"version", "config", "notes", "rows"}; feeding it back through
--config reproduces the run.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .heavy_load import (
    CoefficientError,
    RegionAxes,
    coefficients,
    gain_level_set,
    optimize_scheme,
    region_3d_underlay_bounds,
    region_membership,
    trace_boundary,
)
from .kernel import ConvergenceError, DomainError, db_to_linear
from .model import (
    Deployment,
    DesignParams,
    OperationalPoint,
    Scheme,
    Selection,
    cell_nonempty_prob,
    constrained_design,
    rate_average,
    rate_cellular,
    rate_d2d,
    rate_no_d2d,
)
from .montecarlo import SimConfig, estimate_gains

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
DEFAULT_REALIZATIONS = 20_000
FULL_REALIZATIONS = 100_000

SWEEP_SCHEMES = {
    Deployment.OVERLAY: (Scheme.S1, Scheme.S2, Scheme.S3P, Scheme.S3D),
    Deployment.UNDERLAY: (Scheme.S1, Scheme.S2, Scheme.S3P, Scheme.S3D, Scheme.S4P),
}

COLUMNS = {
    "rate": ["deployment", "selection", "p", "q", "pk0", "eta_c", "ap_power",
             "rate_cellular", "rate_d2d", "rate_average", "rate_no_d2d", "gain"],
    "optimize": ["scheme", "deployment", "p_star", "q_star", "f_star", "gain", "in_region", "boundary", "note"],
    "region": ["scheme", "deployment", "in_region", "c1", "c2", "c1_bar", "c2_bar", "c3_bar",
               "inner_3d_bound", "outer_3d_bound"],
    "boundary": ["x", "y"],
    "levelset": ["x", "y"],
    "mc-validate": ["scheme", "deployment", "p_star", "q_star", "gain_analytic", "gain_mc", "mc_stderr", "realizations"],
    "sweep-rmax": ["rmax_normalized", "scheme", "deployment", "p_star", "q_star", "r_th_normalized",
                   "gain_analytic", "gain_mc", "mc_stderr"],
    "sweep-density": ["due_per_cell", "scheme", "deployment", "p_star", "q_star",
                      "gain_analytic", "gain_mc", "mc_stderr"],
}


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_point(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("operational point")
    g.add_argument("--cue-per-cell", type=float, default=10.0, help="lambda_c / lambda_a (absolute lambda_c with --absolute)")
    g.add_argument("--due-per-cell", type=float, default=10.0, help="lambda_d / lambda_a (absolute lambda_d with --absolute)")
    g.add_argument("--lambda-a", type=float, default=1.0, help="AP density")
    g.add_argument("--rmax", type=float, default=0.4, help="r_d,max * 2 sqrt(lambda_a) (absolute r_d,max with --absolute)")
    g.add_argument("--theta-db", type=float, default=-6.0, help="SIR threshold in dB")
    g.add_argument("--alpha", type=float, default=4.0, help="path loss exponent")
    g.add_argument("--absolute", action="store_true", help="read densities and r_d,max as absolute values")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_mc(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("Monte Carlo")
    g.add_argument("--realizations", type=int, default=None, help=f"default {DEFAULT_REALIZATIONS}")
    g.add_argument("--full", action="store_true", help=f"use {FULL_REALIZATIONS} realizations")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--guard-factor", type=float, default=2.0)
    g.add_argument("--mean-ap-count", type=float, default=30.0)
    g.add_argument("--workers", type=int, default=1)


def _add_selector(p, multi: bool, default_deployment="both") -> None:
    schemes = [s.value for s in Scheme]
    if multi:
        p.add_argument("--scheme", nargs="+", choices=schemes + ["all"], default=["all"])
        p.add_argument("--deployment", choices=("overlay", "underlay", "both"), default=default_deployment)
    else:
        p.add_argument("--scheme", choices=schemes, required=True)
        p.add_argument("--deployment", choices=("overlay", "underlay"), required=True)


def _add_axes(p) -> None:
    p.add_argument("--x-range", type=float, nargs=2, default=(1e-2, 1e2), metavar=("LO", "HI"),
                   help="lambda_d E[pi r_d^2] window")
    p.add_argument("--y-range", type=float, nargs=2, default=(1e-1, 1e2), metavar=("LO", "HI"),
                   help="lambda_d / lambda_a window")
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--along", choices=("x", "y"), default="x", help="axis bisected for each grid row")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    columns = "\n".join(f"  {k}: {', '.join(v)}" for k, v in COLUMNS.items())
    parser = argparse.ArgumentParser(
        prog="d2dregion",
        description=__doc__,
        epilog="CSV columns by command:\n" + columns,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON run file (a previous JSON output or a flat key/value object)")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["rate"] = sub.add_parser("rate", help="general-load rates of one design at the rate-preserving resource split")
    _add_point(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--deployment", choices=("overlay", "underlay"), default="overlay")
    p.add_argument("--selection", choices=[s.value for s in Selection], default="probabilistic")
    p.add_argument("--heavy-load", action="store_true", help="set P(K>0) = 1")

    p = subs["optimize"] = sub.add_parser("optimize", help="optimal mode parameters per scheme")
    _add_point(p)
    _add_selector(p, multi=True)

    p = subs["region"] = sub.add_parser("region", help="closed-form region membership at a point")
    _add_point(p)
    _add_selector(p, multi=True)

    p = subs["boundary"] = sub.add_parser("boundary", help="trace an operational region boundary")
    _add_point(p)
    _add_selector(p, multi=False)
    _add_axes(p)

    p = subs["levelset"] = sub.add_parser("levelset", help="trace a maximum-gain isoline")
    _add_point(p)
    _add_selector(p, multi=False)
    _add_axes(p)
    p.add_argument("--gain", type=float, required=True)

    for name, hlp in (
        ("mc-validate", "analytic optimal gains against Monte Carlo"),
        ("sweep-rmax", "gains versus normalized r_d,max"),
        ("sweep-density", "gains versus lambda_d / lambda_a"),
    ):
        p = subs[name] = sub.add_parser(name, help=hlp)
        _add_point(p)
        _add_selector(p, multi=True)
        _add_mc(p)
        p.add_argument("--no-mc", action="store_true", help="analytic columns only")
    subs["sweep-rmax"].add_argument("--grid", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.5])
    subs["sweep-density"].add_argument("--grid", type=float, nargs="+", default=[0.5, 1, 2, 5, 10, 20, 50])

    for p in subs.values():
        _add_output(p)
    return parser, subs


def _load_config(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path!r}: {exc}") from exc
    cfg = doc.get("config", doc) if isinstance(doc, dict) else None
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    return cfg


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    parser, subs = build_parser()
    if known.config:
        cfg = _load_config(known.config)
        command = cfg.get("command")
        if not any(a in subs for a in rest):
            if command not in subs:
                raise InputError("config does not name a command")
            rest = [command] + rest
        target = next(a for a in rest if a in subs)
        valid = {a.dest for a in subs[target]._actions}
        subs[target].set_defaults(**{k: v for k, v in cfg.items() if k in valid})
    args = parser.parse_args(rest)
    args.config = None
    return args


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def point_from_args(a) -> OperationalPoint:
    if a.absolute:
        return OperationalPoint(a.cue_per_cell, a.due_per_cell, a.lambda_a, a.rmax, db_to_linear(a.theta_db), a.alpha)
    return OperationalPoint.from_ratios(a.cue_per_cell, a.due_per_cell, a.rmax, a.theta_db, a.alpha, a.lambda_a)


def _deployments(a) -> list[Deployment]:
    return list(Deployment) if a.deployment == "both" else [Deployment(a.deployment)]


def _schemes(a, dep: Deployment, sweep: bool = False) -> list[Scheme]:
    if "all" in a.scheme:
        return list(SWEEP_SCHEMES[dep]) if sweep else list(Scheme)
    return [Scheme(s) for s in a.scheme]


def _realizations(a) -> int:
    if a.realizations is not None:
        return a.realizations
    return FULL_REALIZATIONS if a.full else DEFAULT_REALIZATIONS


def cmd_rate(a) -> list[dict]:
    op = point_from_args(a)
    dep, sel = Deployment(a.deployment), Selection(a.selection)
    pk0 = 1.0 if a.heavy_load else cell_nonempty_prob(op, a.p)
    dp = constrained_design(op, a.p, a.q, dep, sel, pk0=pk0)
    # the baseline has every D-UE on the cellular link
    base = rate_no_d2d(op, 1.0 if a.heavy_load else cell_nonempty_prob(op, 0.0))
    r = rate_average(op, dp, pk0)
    return [{
        "deployment": dep.value, "selection": sel.value, "p": a.p, "q": a.q, "pk0": pk0,
        "eta_c": dp.eta_c, "ap_power": dp.ap_power,
        "rate_cellular": rate_cellular(op, dp, pk0),
        "rate_d2d": rate_d2d(op, dp, pk0) if a.p > 0 else 0.0,
        "rate_average": r, "rate_no_d2d": base, "gain": r / base,
    }]


def cmd_optimize(a) -> list[dict]:
    c = coefficients(point_from_args(a))
    return [optimize_scheme(c, s, d).as_dict() for d in _deployments(a) for s in _schemes(a, d)]


def cmd_region(a) -> list[dict]:
    c = coefficients(point_from_args(a))
    inner, outer = region_3d_underlay_bounds(c)
    rows = []
    for d in _deployments(a):
        for s in _schemes(a, d):
            is_3d_under = d is Deployment.UNDERLAY and s is Scheme.S3D
            rows.append({
                "scheme": s.value, "deployment": d.value, "in_region": region_membership(c, s, d),
                "c1": c.c1, "c2": c.c2, "c1_bar": c.c1_bar, "c2_bar": c.c2_bar, "c3_bar": c.c3_bar,
                "inner_3d_bound": inner if is_3d_under else None,
                "outer_3d_bound": outer if is_3d_under else None,
            })
    return rows


def _axes(a) -> RegionAxes:
    op = point_from_args(a)
    return RegionAxes(op.alpha, op.theta_0, op.lambda_c / op.lambda_a, tuple(a.x_range), tuple(a.y_range))


def _curve_rows(curve, notes: list[str]) -> list[dict]:
    if curve.inside_everywhere:
        notes.append("entire window inside")
    elif curve.outside_everywhere:
        notes.append("entire window outside")
    return [{"x": x, "y": y} for x, y in curve.points]


def cmd_boundary(a, notes) -> list[dict]:
    return _curve_rows(trace_boundary(a.scheme, a.deployment, _axes(a), a.resolution, a.along), notes)


def cmd_levelset(a, notes) -> list[dict]:
    if not a.gain >= 1.0:
        raise InputError(f"--gain must be >= 1, got {a.gain}")
    return _curve_rows(gain_level_set(a.scheme, a.deployment, _axes(a), a.gain, a.resolution, a.along), notes)


def _analytic_and_mc(a, op: OperationalPoint, extra: dict) -> list[dict]:
    c = coefficients(op)
    rows, designs = [], []
    for d in _deployments(a):
        for s in _schemes(a, d, sweep=True):
            res = optimize_scheme(c, s, d)
            sel = Selection.DISTANCE if s in (Scheme.S3D, Scheme.S4D) else Selection.PROBABILISTIC
            designs.append(constrained_design(op, res.p_star, res.q_star, d, sel, pk0=1.0))
            rows.append({
                **extra, "scheme": s.value, "deployment": d.value, "p_star": res.p_star, "q_star": res.q_star,
                "r_th_normalized": math.sqrt(res.p_star) * op.rmax_normalized if sel is Selection.DISTANCE else None,
                "gain_analytic": max(res.gain, 1.0), "gain_mc": None, "mc_stderr": None,
                "realizations": None,
            })
            if not res.in_region:
                # outside the region the operator keeps D2D off
                designs[-1] = DesignParams(0.0, 0.0, Deployment.OVERLAY, eta_c=1.0)
    if not a.no_mc and rows:
        n = _realizations(a)
        cfg = SimConfig(op, designs[0], n, a.mean_ap_count, a.guard_factor, a.seed, a.workers)
        for row, est in zip(rows, estimate_gains(cfg, designs)):
            if not (math.isfinite(est.value) and math.isfinite(est.std_error)):
                raise FloatingPointError(f"non-finite Monte Carlo estimate for scheme {row['scheme']}")
            row.update(gain_mc=est.value, mc_stderr=est.std_error, realizations=n)
    return rows


def cmd_mc_validate(a) -> list[dict]:
    return _analytic_and_mc(a, point_from_args(a), {})


def cmd_sweep_rmax(a) -> list[dict]:
    base = point_from_args(a)
    rows = []
    for i, r in enumerate(a.grid):
        op = base.with_(r_d_max=r / (2.0 * math.sqrt(base.lambda_a)))
        rows += _analytic_and_mc(_with_seed(a, i), op, {"rmax_normalized": r})
    return rows


def cmd_sweep_density(a) -> list[dict]:
    base = point_from_args(a)
    rows = []
    for i, y in enumerate(a.grid):
        op = base.with_(lambda_d=y * base.lambda_a)
        rows += _analytic_and_mc(_with_seed(a, i), op, {"due_per_cell": y})
    return rows


def _with_seed(a, offset: int):
    # distinct, reproducible seeds per grid point
    b = argparse.Namespace(**vars(a))
    b.seed = a.seed + offset
    return b


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _clean(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def render(command: str, config: dict, rows: list[dict], fmt: str, notes: list[str]) -> str:
    cols = COLUMNS[command]
    rows = [{k: _clean(r.get(k)) for k in cols} for r in rows]
    if fmt == "json":
        return json.dumps({"version": __version__, "config": config, "notes": notes, "rows": rows}, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# d2dregion {__version__}\n")
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    for n in notes:
        buf.write(f"# note: {n}\n")
    w = csv.DictWriter(buf, fieldnames=cols)
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


HANDLERS = {
    "rate": cmd_rate,
    "optimize": cmd_optimize,
    "region": cmd_region,
    "mc-validate": cmd_mc_validate,
    "sweep-rmax": cmd_sweep_rmax,
    "sweep-density": cmd_sweep_density,
}


def run(args: argparse.Namespace) -> str:
    notes: list[str] = []
    if args.command in ("boundary", "levelset"):
        rows = (cmd_boundary if args.command == "boundary" else cmd_levelset)(args, notes)
    else:
        rows = HANDLERS[args.command](args)
    config = {k: v for k, v in vars(args).items() if k not in ("output", "format", "config")}
    return render(args.command, config, rows, args.format, notes)


def _fail(kind: str, exc: BaseException, code: int) -> int:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        text = run(args)
    except (CoefficientError, DomainError, InputError) as exc:
        return _fail("invalid input", exc, EXIT_INPUT)
    except (ConvergenceError, FloatingPointError) as exc:
        return _fail("numerical failure", exc, EXIT_NUMERIC)
    except ValueError as exc:
        return _fail("invalid input", exc, EXIT_INPUT)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
