"""Command-line entry point: five experiment subcommands over YAML configs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .runners import (
    run_classical,
    run_id_time,
    run_id_traj,
    run_oracle_check,
    run_spectrum,
)
from .trajectory import StepTooCoarse

_COMMANDS = {
    "id-time": (run_id_time, "fixed-time intrinsic dimension versus time (sweepable)"),
    "id-traj": (run_id_traj, "single-trajectory intrinsic dimension versus sampling interval"),
    "spectrum": (run_spectrum, "eigenvalues, spacings, and complex ratios of the generator"),
    "classical": (run_classical, "mean-field orbits of the dissipative top"),
    "oracle-check": (run_oracle_check, "trajectory averages versus direct density-matrix propagation"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qjlab",
        description="Quantum-jump trajectory toolkit: unraveling, intrinsic dimension, spectra.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=True, help="YAML experiment config")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for ensembles")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    runner, _ = _COMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        result = runner(cfg, args.out, threads=args.threads, seed=args.seed)
    except (ConfigError, StepTooCoarse, ValueError, OSError) as exc:
        print(f"qjlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if args.command == "oracle-check" and not result["passed"]:
        print(
            f"qjlab oracle-check: FAIL (max z = {result['max_z']:.2f} "
            f">= {result['threshold']})",
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
