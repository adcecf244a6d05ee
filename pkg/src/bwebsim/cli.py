"""Command-line interface: ``bwebsim {simulate,count,verify,plot}``.

Exit codes: 0 success, 1 a verification check failed, 2 usage or input
error, 3 a walker left the declared window.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path as FsPath

from . import io, plotting, suite
from .brownian import SkeletonConfig, sample_skeleton
from .counting import CountingQuery, eta, l_r_endpoints, n_plus_minus, n_set
from .stats import CSV_FIELDS
from .walks import (
    CoalescingSystem,
    ConfigError,
    WindowOverflowError,
    rescale,
    simulate_continuous,
    simulate_crossing,
    simulate_discrete,
)


class UsageError(Exception):
    pass


def _load_json(path):
    if path is None:
        raise UsageError("--config is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _default_starts(system: CoalescingSystem):
    """Every admissible lattice point in the middle half of the window, before the last time."""
    (x_lo, x_hi), (t_lo, t_hi) = system.window.x, system.window.t
    q = (x_hi - x_lo) / 4
    starts = []
    for j in range(math.ceil(t_lo), math.floor(t_hi)):
        for i in range(math.ceil(x_lo + q), math.floor(x_hi - q) + 1):
            if system.kind != "discrete_parity" or (i + j) % 2 == 0:
                starts.append((i, j))
    return starts


def cmd_simulate(args) -> int:
    cfg = _load_json(args.config)
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = FsPath(args.out)
    man = io.Manifest(out, args.argv, cfg.get("seed"), cfg)
    extra = {}
    if cfg.get("kind") == "skeleton":
        sk = SkeletonConfig.from_json(cfg)
        K, records = sample_skeleton(sk)
        extra = {"config": sk.to_json(), "coalescence": [r.to_json() for r in records]}
    else:
        system = CoalescingSystem.from_json(cfg)
        starts = [tuple(s) for s in cfg["starts"]] if "starts" in cfg else _default_starts(system)
        horizon = cfg.get("horizon", system.window.t[1])
        if not starts:
            raise ConfigError("no starting points")
        if system.kind == "discrete_parity":
            K = simulate_discrete(system, starts, int(horizon))
        elif system.kind == "discrete_crossing":
            K = simulate_crossing(system, starts, int(horizon))
        else:
            K = simulate_continuous(system, starts, float(horizon))
        if cfg.get("rescale", False):
            K = rescale(K, system.delta)
        extra = {"config": system.to_json(), "horizon": horizon, "rescaled": bool(cfg.get("rescale", False))}
    man.write("family.json", io.dumps(io.family_json(K, extra)))
    man.write("knots.csv", io.csv_text(io.KNOT_FIELDS, io.knots_rows(K), io.KNOTS_SCHEMA))
    if args.svg:
        man.write("family.svg", plotting.family_svg(K))
    man.finish()
    print(f"{len(K)} paths written to {out}")
    return 0


COUNT_FIELDS = ("query", "t0", "t", "a", "b", "eta", "eta_hat", "l", "r", "n", "n_plus", "n_minus")


def cmd_count(args) -> int:
    if args.family is None or args.query is None:
        raise UsageError("count needs --family and --query")
    try:
        K = io.load_family(args.family)
    except OSError as exc:
        raise UsageError(f"cannot read {args.family}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.family}: invalid JSON ({exc.msg})") from exc
    qs = _load_json(args.query)
    qs = qs if isinstance(qs, list) else [qs]
    try:
        queries = [CountingQuery.from_json(q) for q in qs]
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed query: {exc}") from exc
    rows = []
    for k, q in enumerate(queries):
        e = eta(K, q)
        lo, hi = l_r_endpoints(K, q)
        nm, npl = n_plus_minus(K, q)
        rows.append({
            "query": k, "t0": q.t0, "t": q.t, "a": q.a, "b": q.b, "eta": e, "eta_hat": max(e - 1, 0),
            "l": lo, "r": hi, "n": len(n_set(K, q)), "n_plus": len(npl), "n_minus": len(nm),
        })
    man = io.Manifest(args.out, args.argv, None, qs)
    man.write("count.csv", io.csv_text(COUNT_FIELDS, rows, io.COUNT_SCHEMA))
    man.finish()
    print(f"{len(rows)} queries evaluated")
    return 0


def cmd_verify(args) -> int:
    suite_cfg = _load_json(args.config)
    checks = suite.validate_suite(suite_cfg)
    seed = int(args.seed if args.seed is not None else suite_cfg.get("seed", 0))
    reports = []
    for c in checks:
        reports.extend(suite.run_check(c["name"], c.get("params", {}), seed, args.replicas, args.workers))
    rows = [r.row() for r in reports]
    man = io.Manifest(args.out, args.argv, seed, suite_cfg)
    man.write("reports.csv", io.csv_text(CSV_FIELDS, rows, io.REPORTS_SCHEMA))
    man.write("reports.svg", plotting.reports_svg([{k: io._cell(v) for k, v in r.items()} for r in rows]))
    man.finish()
    failed = [r for r in reports if not r.passed]
    for r in reports:
        if r.verdict in ("pass", "fail"):
            print(f"{r.verdict.upper():4s} {r.name} estimate={r.estimate:.6g} target={r.target} tol={r.tolerance:.3g}")
    return 1 if failed else 0


def cmd_plot(args) -> int:
    inputs = args.input or []
    if not inputs:
        raise UsageError("plot needs at least one --input CSV")
    man = io.Manifest(args.out, args.argv)
    for path in inputs:
        try:
            schema, rows = io.read_csv(path, expect=(io.REPORTS_SCHEMA, io.COUNT_SCHEMA))
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
        svg = plotting.reports_svg(rows) if schema == io.REPORTS_SCHEMA else plotting.count_svg(rows)
        man.write(FsPath(path).stem + ".svg", svg)
    man.finish()
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit), overrides the config")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--workers", type=int, default=1, help="parallel worker threads; never changes results")
    common.add_argument("--replicas", type=int, help="override the replica count of every check")
    p = argparse.ArgumentParser(prog="bwebsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="simulate a walk system or skeleton")
    s.add_argument("--svg", action="store_true", help="also render family.svg")
    c = sub.add_parser("count", parents=[common], help="evaluate counting queries on a family")
    c.add_argument("--family", help="family JSON file")
    c.add_argument("--query", help="query JSON (object or array)")
    sub.add_parser("verify", parents=[common], help="run a verification suite")
    pl = sub.add_parser("plot", parents=[common], help="render SVG plots from report or count CSVs")
    pl.add_argument("--input", action="append", help="CSV file (repeatable)")
    return p


COMMANDS = {"simulate": cmd_simulate, "count": cmd_count, "verify": cmd_verify, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = ["bwebsim", *(sys.argv[1:] if argv is None else argv)]
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    if args.replicas is not None and args.replicas < 1:
        parser.error("--replicas must be >= 1")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    try:
        return COMMANDS[args.command](args)
    except WindowOverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except suite.UnknownCheck as exc:
        print(f"error: unknown check {exc.args[0]!r}", file=sys.stderr)
        return 2
    except (UsageError, ConfigError, io.SchemaError, ValueError, KeyError, TypeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
