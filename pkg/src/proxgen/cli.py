"""Command-line entry point: ``proxgen <experiment> --config <path>``.

Exit status is 0 when every grid cell finished, 2 when some cells diverged
or failed (their rows are still written), and 1 on configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from .core import ConfigurationError
from .experiments import EXPERIMENTS, load_config, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="proxgen", description="Run a stochastic proximal-gradient experiment grid.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="flat 'key = value' configuration file")
    ap.add_argument("--jobs", type=int, default=1, help="grid cells run in parallel (default 1)")
    ap.add_argument("--seed", type=int, nargs="+", dest="seeds", help="override the configured seeds")
    ap.add_argument("--out", dest="output_dir", help="override the configured output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("proxgen: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.experiment, seeds=args.seeds, output_dir=args.output_dir)
    except ConfigurationError as err:
        print(f"proxgen: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg, jobs=args.jobs)
    except OSError as err:
        print(f"proxgen: {err.strerror}: {err.filename}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{len(result.rows)} rows written to {result.out_dir / 'summary.csv'}")
    if result.failures:
        print(f"proxgen: {result.failures} grid cell(s) did not finish", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
