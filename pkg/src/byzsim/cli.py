"""Command-line interface: validate a config, run an experiment, or sweep one
parameter axis. All outputs are plot-ready CSV/JSON files."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .runner import SWEEP_AXES, run_and_persist, sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="byzsim",
        description="Deterministic simulator of federated learning under byzantine attacks.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment (all repeats) and persist metrics")
    run_p.add_argument("--config", required=True, help="path to a YAML config")
    run_p.add_argument("--out", required=True, help="output directory")

    sweep_p = sub.add_parser("sweep", help="run one experiment per value of a swept parameter")
    sweep_p.add_argument("--config", required=True, help="path to a YAML config")
    sweep_p.add_argument("--axis", required=True,
                         help=f"swept parameter, one of: {', '.join(sorted(SWEEP_AXES))}")
    sweep_p.add_argument("--values", required=True, help="comma-separated numeric values")
    sweep_p.add_argument("--out", required=True, help="output directory")

    val_p = sub.add_parser("validate", help="parse and validate a config, printing the result")
    val_p.add_argument("--config", required=True, help="path to a YAML config")
    return parser


def _parse_values(text: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"--values must be a comma-separated list of numbers: {exc}")
    if not values:
        raise ConfigError("--values must contain at least one number")
    return values


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "validate":
            print(f"configuration OK: {config.run.rounds} rounds, "
                  f"{config.data.num_clients} clients, beta={config.attack.beta:g}, "
                  f"gamma={config.server.gamma:g}, filter={config.filter.kind}, "
                  f"aggregator={config.aggregator.kind}")
            return 0
        if args.command == "run":
            summary = run_and_persist(config, args.out)
            final = summary["final_accuracy"]
            if final is None:
                print(f"wrote {args.out} (no rounds)")
            else:
                print(f"wrote {args.out}  final accuracy "
                      f"mean={final['mean']:.4f} min={final['min']:.4f} max={final['max']:.4f}")
            return 0
        rows = sweep(config, args.axis, _parse_values(args.values), args.out)
        print(f"wrote {args.out}/sweep.csv ({len(rows)} rows)")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
