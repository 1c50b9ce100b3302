"""Command line entry point: ``python -m chemofv {run,sweep,audit,calibrate,converge}``.

Exit codes: 0 completed with all hard audits passing, 2 BlowUpSuspected or
DtUnderflow, 1 configuration or runtime error (including a failed audit).

Every config key can be overridden by a flag of the same dotted path, e.g.
``--params.chi 1.5`` or ``--u0.center "[0.3, 0.4]"``; values are parsed as YAML.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import yaml

from ..functionals import (calibrate_cgn, entropy_bound_audit, heat_decay_audit, linear_growth_audit,
                           parse_constants_text, run_constant)
from ..mesh import Grid
from .config import ConfigError, ScenarioConfig, SweepConfig, load_config
from .generators import materialize
from .runner import SWEEP_COLUMNS, TRACKED, convergence_study, read_csv, run_scenario, run_sweep

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_STOPPED = 2


def parse_overrides(tokens: list[str]) -> dict:
    """``--a.b value`` / ``--a.b=value`` pairs to a {path: value} dict."""
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--") or len(tok) < 3:
            raise ConfigError("", f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
        else:
            raw = next(it, None)
            if raw is None:
                raise ConfigError(key, "flag needs a value")
        try:
            out[key] = yaml.safe_load(raw)
        except yaml.YAMLError:
            raise ConfigError(key, f"cannot parse value {raw!r}") from None
    return out


def _cmd_run(args, overrides) -> int:
    cfg = load_config(args.config, overrides)
    if isinstance(cfg, SweepConfig):
        raise ConfigError("sweep", "config describes a sweep; use the sweep subcommand")
    res = run_scenario(cfg)
    print(res.summary())
    for k, p in res.paths.items():
        print(f"wrote {k}: {p}")
    if not res.status.completed:
        return EXIT_STOPPED
    return EXIT_OK if res.audits_pass else EXIT_ERROR


def _cmd_sweep(args, overrides) -> int:
    cfg = load_config(args.config, overrides)
    if isinstance(cfg, ScenarioConfig):
        cfg = SweepConfig(cfg, {}, 1, 1)
    rows, path = run_sweep(cfg)
    k = SWEEP_COLUMNS.index("status")
    errors = sum(1 for r in rows if r[k] == "Error")
    print(f"{len(rows)} points, {errors} failed; wrote {path}")
    return EXIT_OK if errors == 0 else EXIT_ERROR


def _cmd_audit(args, overrides) -> int:
    if overrides:
        raise ConfigError("", "audit takes no config overrides")
    cols = read_csv(args.csv)
    t = cols["t"]
    ok = True
    for name in TRACKED:
        series = list(zip(t, cols[name]))
        C = args.C if args.C is not None else run_constant(series)
        if not all(math.isfinite(q) for _, q in series) or not C > 0:
            print(f"linear_growth[{name}] = non-finite or degenerate series FAIL")
            ok = False
            continue
        a = linear_growth_audit(series, C)
        print(f"linear_growth[{name}] = C {C:.17g} ratio {a.ratio:.17g} {'pass' if a.passed else 'FAIL'}")
        ok &= a.passed
    c2 = args.c2
    if c2 is None and args.constants is not None:
        kv = parse_constants_text(Path(args.constants).read_text())
        try:
            c2 = float(kv["c2"])
        except (KeyError, ValueError):
            c2 = None
    if c2 is None:
        print("entropy_bound = skipped (no c2)")
    else:
        e = entropy_bound_audit(list(zip(t, cols["F"])), float(cols["F"][0]), c2, args.area)
        print(f"entropy_bound = ratio {e.ratio:.17g} {'pass' if e.passed else 'FAIL'}")
        ok &= e.passed
    return EXIT_OK if ok else EXIT_ERROR


def _cmd_calibrate(args, overrides) -> int:
    if overrides:
        raise ConfigError("", "calibrate takes no config overrides")
    grid = Grid(args.nx, args.ny)
    c = calibrate_cgn(args.samples, args.p_grid, args.seed, grid)
    print(f"C_GN = {c:.17g}")
    if args.heat:
        u0 = materialize({"kind": "gaussian-bump", "amplitude": 1.0, "base": 0.0, "center": None,
                          "width": args.width, "mass": None}, grid, args.seed)
        cs = heat_decay_audit(grid.field(u0), args.beta, args.times)
        print(f"C_S = {cs:.17g}")
    return EXIT_OK


def _cmd_converge(args, overrides) -> int:
    cfg = load_config(args.config, overrides)
    if isinstance(cfg, SweepConfig):
        cfg = cfg.base
    rep = convergence_study(cfg, args.levels, args.mms_horizon, discrepancy=not args.no_discrepancy)
    print(rep.text(), end="")
    print(f"mms_order = {rep.mms_order:.17g}")
    ok = all(1.7 <= o <= 2.3 for o in rep.mms_orders)
    return EXIT_OK if ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="python -m chemofv", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("config")
    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("config")
    p = sub.add_parser("audit", help="re-run the auditors on a diagnostics CSV")
    p.add_argument("csv")
    p.add_argument("--constants", help="constants report to read c2 from")
    p.add_argument("--c2", type=float)
    p.add_argument("--C", type=float, help="growth constant (default: run-reported max q/(1+t))")
    p.add_argument("--area", type=float, default=1.0)
    p = sub.add_parser("calibrate", help="empirical C_GN (and C_S with --heat)")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nx", type=int, default=32)
    p.add_argument("--ny", type=int, default=32)
    p.add_argument("--p-grid", type=float, nargs="+", default=[2.0, 2.5, 3.0, 3.5, 4.0])
    p.add_argument("--heat", action="store_true")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--width", type=float, default=0.1)
    p.add_argument("--times", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.5, 1.0])
    p = sub.add_parser("converge", help="manufactured-solution order and formulation discrepancy")
    p.add_argument("config")
    p.add_argument("--levels", type=int, nargs="+", default=[16, 32, 64])
    p.add_argument("--mms-horizon", type=float, default=0.1)
    p.add_argument("--no-discrepancy", action="store_true")
    return ap


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "audit": _cmd_audit,
            "calibrate": _cmd_calibrate, "converge": _cmd_converge}


def main(argv=None) -> int:
    ap = build_parser()
    args, rest = ap.parse_known_args(argv)
    try:
        return COMMANDS[args.command](args, parse_overrides(rest))
    except (ConfigError, ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
