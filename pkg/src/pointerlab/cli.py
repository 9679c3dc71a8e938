"""Command-line entry point.

    pointerlab run [--config FILE] [--experiment NAME] [--seed N]
                   [--out DIR] [--format csv|json] [--threads N]

Exit status: 0 on success, 1 on a runtime failure inside a module, 2 on a
configuration problem. The config file is optional; every experiment runs
from built-in defaults once named. One line per threshold check is printed
so a terminal run shows the pass/fail outcome that the manifest records.
"""

from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENTS, FORMATS, build_config, read_config_file
from .errors import ConfigError, PointerlabError
from .experiments import run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointerlab",
        description="Pointer-state formation, unravelings, and outcome statistics.")
    commands = parser.add_subparsers(dest="command", required=True)
    run = commands.add_parser("run", help="run one configured experiment")
    run.add_argument("--config", help="sectioned key = value config file")
    run.add_argument("--experiment", choices=EXPERIMENTS,
                     help="experiment name (overrides the config file)")
    run.add_argument("--seed", type=int, help="64-bit unsigned seed")
    run.add_argument("--out", help="output directory (default: out)")
    run.add_argument("--format", choices=FORMATS, help="data file format")
    run.add_argument("--threads", type=int,
                     help="worker threads; affects wall time, never results")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = read_config_file(args.config) if args.config else None
        config = build_config(raw, experiment=args.experiment, seed=args.seed,
                              out_dir=args.out, format=args.format,
                              threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        manifest = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PointerlabError as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    for check in manifest["checks"]:
        verdict = "pass" if check["passed"] else "FAIL"
        print(f"{verdict}  {check['name']}: {check['detail']}")
    print(f"wrote {config.out_dir}/{config.experiment}/manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
