"""Command-line front end.

Exit codes: 0 success, 1 divergence or failed property check, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import load_config, load_config_file, builtin_config_text
from .errors import ConfigError
from .report import format_table, trace_filename, write_metrics_csv, write_trace_csv
from .sim import compare_controllers

log = logging.getLogger("robust_mpc")

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_USAGE = 2

SIM1_RMSE_BOUND = 0.05


def _out_dir(arg):
    out = Path(arg or os.environ.get("ROBUST_MPC_OUT") or "results")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _execute(groups: dict, out: Path, workers: int):
    """Run every scenario group, write traces and metrics.csv; return {section: [(result, c)]}."""
    done = {}
    for section, scenarios in groups.items():
        log.info("running %s (%d controllers)", section, len(scenarios))
        cmp = compare_controllers(scenarios, workers=workers)
        pairs = [(res, sc.c) for res, sc in zip(cmp.results, scenarios)]
        for res, _ in pairs:
            write_trace_csv(res, out / trace_filename(res))
        done[section] = pairs
    write_metrics_csv([p for pairs in done.values() for p in pairs], out / "metrics.csv")
    return done


def _report(done: dict, quiet: bool):
    if not quiet:
        print(format_table([p for pairs in done.values() for p in pairs]))
    failed = [res for pairs in done.values() for res, _ in pairs if res.failed]
    for res in failed:
        print(f"error: {res.name}/{res.controller} diverged: {res.error}", file=sys.stderr)
    return failed


def cmd_run(args) -> int:
    groups = load_config_file(args.scenario, args.set, args.seed)
    out = _out_dir(args.out)
    done = _execute(groups, out, args.workers)
    failed = _report(done, args.quiet)
    return EXIT_PROPERTY if failed else EXIT_OK


def cmd_validate(args) -> int:
    groups = load_config_file(args.scenario, args.set, args.seed)
    if not args.quiet:
        for section, scenarios in groups.items():
            sc = scenarios[0]
            roster = ", ".join(
                f"{s.controller}({'c=%g' % s.c if s.robust else 'kf'})" for s in scenarios
            )
            print(f"[{section}] plant={sc.plant_kind} duration={sc.duration:g}s T={sc.sample_time:g}s "
                  f"Hp={sc.mpc.Hp} Hu={sc.mpc.Hu} seed={sc.seed} controllers: {roster}")
        print("ok")
    return EXIT_OK


def check_builtin_properties(done: dict) -> list[str]:
    """Property checks of the servo comparison; returns the violated ones."""
    problems = []
    for section, pairs in done.items():
        for res, _ in pairs:
            if res.failed:
                problems.append(f"{section}/{res.controller} diverged")
    sim1 = {res.controller: res.metrics for res, _ in done.get("sim1", [])}
    for label, m in sim1.items():
        if not m["tracking_rmse_settled"] < SIM1_RMSE_BOUND:
            problems.append(
                f"sim1: settled RMSE of {label} = {m['tracking_rmse_settled']:.4g} rad is not < {SIM1_RMSE_BOUND}"
                f" ({m['tracking_rmse_steady']:.4g} rad without the preview window before each edge)"
            )
    sim2 = {res.controller: res.metrics for res, _ in done.get("sim2", [])}
    if "R-MPC2" in sim2 and "S-MPC" in sim2:
        a = sim2["R-MPC2"]["tracking_rmse_settled"]
        b = sim2["S-MPC"]["tracking_rmse_settled"]
        if not a < b:
            problems.append(f"sim2: RMSE(R-MPC2) = {a:.4g} is not below RMSE(S-MPC) = {b:.4g}")
    return problems


def cmd_reproduce(args) -> int:
    groups = load_config(builtin_config_text(), args.set, args.seed)
    out = _out_dir(args.out)
    done = _execute(groups, out, args.workers)
    _report(done, args.quiet)
    problems = check_builtin_properties(done)
    for msg in problems:
        print(f"property violated: {msg}", file=sys.stderr)
    if not problems and not args.quiet:
        print("all properties hold")
    return EXIT_PROPERTY if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-mpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required):
        if scenario_required:
            p.add_argument("--scenario", required=True, help="scenario file (INI)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scenario key; prefix with 'section.' to target one section")
        p.add_argument("--seed", type=int, default=None, help="noise seed for every scenario")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("run", help="run the scenarios of a config file")
    common(p, True)
    p.add_argument("--out", default=None, help="output directory (default $ROBUST_MPC_OUT or ./results)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reproduce-paper", help="run the built-in servo comparison and check its properties")
    common(p, False)
    p.add_argument("--out", default=None, help="output directory (default $ROBUST_MPC_OUT or ./results)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("validate-config", help="parse and validate a config file")
    common(p, True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
