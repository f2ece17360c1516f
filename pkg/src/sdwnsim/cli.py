"""Command-line interface.

Subcommands: run (one config), sweep (parameter grid, both policies),
oracle (solver vs brute-force verification), report (stats over a CSV).
Exit status: 0 success, 2 validation error, 3 oracle gap failure.
"""

import argparse
import sys

import numpy as np

from . import harness, metrics
from .config import load_config
from .errors import ConfigError, OracleSizeError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ORACLE_GAP = 3


def _parse_param(spec: str):
    try:
        name, rng = spec.split("=", 1)
        start, end, step = (float(x) for x in rng.split(":"))
    except ValueError:
        raise ConfigError(f"--param must look like NAME=START:END:STEP, got {spec!r}")
    if step <= 0 or end < start:
        raise ConfigError(f"--param {name}: need START <= END and STEP > 0")
    values = []
    v = start
    while v <= end + 1e-12:
        values.append(round(v, 12))
        v += step
    return name, values


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, master_seed=args.seed)
    records = harness.run_scenario(cfg, workers=args.workers)
    harness.write_csv(records, args.out, timing=args.timing)
    print(f"{len(records)} records -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    grid = {}
    for spec in args.param:
        name, values = _parse_param(spec)
        grid[name] = values
    records = harness.sweep(cfg, grid, workers=args.workers)
    harness.write_csv(records, args.out, timing=args.timing)
    print(f"{len(records)} records -> {args.out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    report = harness.verify_oracle(cfg, grid_step=args.grid_step)
    print(f"scenario: {report.scenario_kind}")
    print(f"solver objective: {harness.format_float(report.solver_objective)}")
    print(f"oracle objective: {harness.format_float(report.oracle_objective)}")
    print(f"gap: {harness.format_float(report.gap)} (tolerance {report.tolerance})")
    print(f"feasibility agreement: {report.feasibility_agreement}"
          + (f" ({report.detail})" if report.detail else ""))
    print("PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_ORACLE_GAP


def cmd_report(args) -> int:
    records = harness.read_csv(args.infile)
    if not records:
        raise ConfigError("no records in input")
    column = {"edge": "edge_median_rate", "center": "center_median_rate",
              "all": "total_throughput"}[args.filter]
    values = np.array([getattr(r, column) for r in records])
    if args.stat == "median":
        print(harness.format_float(metrics.empirical_cdf(values).median()))
    elif args.stat == "cdf":
        table = metrics.empirical_cdf(values)
        for v, p in zip(table.values, table.probabilities):
            print(f"{harness.format_float(float(v))},{harness.format_float(float(p))}")
    else:
        sp1 = np.mean([r.sp1_throughput for r in records])
        sp2 = np.mean([r.sp2_throughput for r in records])
        print(harness.format_float(metrics.jain_index([sp1, sp2])))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdwnsim",
                                     description="virtualized wireless network simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override master seed")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--timing", action="store_true", help="write measured wall times")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep lambda_mean and/or rho1, both policies")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", action="append", required=True,
                         metavar="NAME=START:END:STEP")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--timing", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="verify the solver against the brute-force oracle")
    p_oracle.add_argument("--config", required=True)
    p_oracle.add_argument("--grid-step", type=float, default=None)
    p_oracle.set_defaults(func=cmd_oracle)

    p_report = sub.add_parser("report", help="statistics over a results CSV")
    p_report.add_argument("--in", dest="infile", required=True)
    p_report.add_argument("--stat", choices=("cdf", "median", "jain"), required=True)
    p_report.add_argument("--filter", choices=("edge", "center", "all"), default="all")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OracleSizeError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
