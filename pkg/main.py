#!/usr/bin/env python3
"""
effham - Main Entry Point

Runs experiment configs, compares results, lists presets and runs the
property suite of the homogenization operator.
"""

import argparse
import sys
from pathlib import Path

# Add the repository root to path
sys.path.insert(0, str(Path(__file__).parent))

from shared.logging_setup import setup_logger

logger = setup_logger()


def cmd_run(args) -> int:
    from cli.runner import run

    return run(args.config, seed=args.seed, out=args.out, threads=args.threads,
               tolerance_scale=args.tolerance_scale)


def cmd_diff(args) -> int:
    from cli.results import diff
    from shared.errors import SchemaMismatch

    try:
        table = diff(args.a, args.b, tolerance=args.tolerance * args.tolerance_scale)
    except (SchemaMismatch, FileNotFoundError, ValueError) as e:
        logger.error(f"Cannot compare {args.a} and {args.b}: {e}")
        return 1
    frame = table.to_frame()
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.3e}"))
    if args.csv:
        frame.to_csv(args.csv, index=False)
    return 0 if table.within_tolerance else 1


def cmd_list_presets(args) -> int:
    from domain.presets import list_presets

    for preset in list_presets():
        flags = ", ".join(f"{k}={v}" for k, v in sorted(preset["flags"].items()))
        print(f"{preset['name']:<18} {preset['description']}")
        print(f"{'':<18} params {preset['params']}  [{flags}]")
    return 0


def cmd_check(args) -> int:
    from cli.runner import check

    return check(args.preset, backend=args.backend, seed=args.seed or 0, out=args.out, threads=args.threads,
                 tolerance_scale=args.tolerance_scale, trials=args.trials)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="Seed for randomized property inputs")
    parser.add_argument("--out", type=str, help="Output directory (overrides EFFHAM_OUT)")
    parser.add_argument("--threads", type=int, help="Worker threads")
    parser.add_argument("--tolerance-scale", type=float, help="Multiplier on every tolerance and budget")


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(description="effham - effective Hamiltonians by homogenization")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="Run an experiment config")
    p_run.add_argument("config", help="Experiment YAML (path, or name under configs/)")
    _common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_diff = sub.add_parser("diff", help="Compare two run directories or two result tables")
    p_diff.add_argument("a")
    p_diff.add_argument("b")
    p_diff.add_argument("--tolerance", type=float, default=1e-2, help="Sup-distance tolerance")
    p_diff.add_argument("--tolerance-scale", type=float, default=1.0)
    p_diff.add_argument("--csv", type=str, help="Also write the difference table here")
    p_diff.set_defaults(func=cmd_diff)

    p_list = sub.add_parser("list-presets", help="List the analytic presets")
    p_list.set_defaults(func=cmd_list_presets)

    p_check = sub.add_parser("check", help="Run the property suite on a preset")
    p_check.add_argument("preset")
    p_check.add_argument("--backend", type=str, default="auto")
    p_check.add_argument("--trials", type=int, default=0, help="Random Lipschitz/sandwich trials")
    _common(p_check)
    p_check.set_defaults(func=cmd_check)

    args = parser.parse_args()
    if not args.command:
        parser.print_help()
        return 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
