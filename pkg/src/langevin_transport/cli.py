"""Command-line entry point: ``langevin-transport <experiment> [--config PATH] [--seed N] ...``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on
configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from importlib import metadata

from . import rng
from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import run


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="langevin-transport",
                                     description="Numerical checks for Langevin transport maps.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML experiment file")
        p.add_argument("--seed", type=int, help="overrides the seed in the config")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--out", default=None, help="output directory (default: results/<experiment>)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.experiment, args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    rng.set_threads(args.threads)
    start = time.perf_counter()
    try:
        report = run(cfg)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report.meta = {"version": _version(), "seed": cfg.seed, "threads": args.threads,
                   "wall_time_s": round(time.perf_counter() - start, 3)}
    out = args.out or f"results/{cfg.experiment}"
    report.write(out, cfg.model_dump(mode="json"))
    if cfg.experiment == "bounds-table":
        header, rows = report.tables["bounds.csv"]
        wr = csv.writer(sys.stdout)
        wr.writerow(header)
        wr.writerows([repr(v) for v in r] for r in rows)
    failed = [r for r in report.rows if not r.passed]
    for r in failed:
        print(f"FAIL {r.check}: value={r.value!r} bound={r.bound!r} inputs={r.inputs}", file=sys.stderr)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {cfg.experiment}: {len(report.rows) - len(failed)}/{len(report.rows)} checks passed; "
          f"report in {out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
