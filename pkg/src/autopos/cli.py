"""Command-line entry point.

Subcommands:
    run      execute one scenario config
    run-all  execute every scenario config in a directory and write the
             combined comparison outputs

Exit codes: 0 success, 1 configuration error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .runner import format_summary, run_all, run_scenario
from .scenario import (
    ConfigError,
    apply_overrides,
    load_scenario,
    resolve_config_path,
)


def _add_override_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, help="override the epoch count")
    parser.add_argument("--cell", type=float, help="override the grid cell size [m]")
    parser.add_argument("--seed", type=int, help="override the random seed")
    parser.add_argument(
        "--carry-beliefs",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="carry per-node beliefs across epochs (static nodes)",
    )
    parser.add_argument(
        "--dump-measurements",
        action="store_true",
        help="write one CSV row per simulated measurement",
    )
    parser.add_argument(
        "--dump-beliefs",
        action="store_true",
        help="write the final per-node belief grids (npz)",
    )
    parser.add_argument("--out-dir", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autopos",
        description="Collaborative auto-positioning benchmark runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single scenario")
    p_run.add_argument(
        "--config",
        required=True,
        help="scenario TOML file (or the name of a bundled scenario)",
    )
    _add_override_args(p_run)

    p_all = sub.add_parser("run-all", help="run every scenario in a directory")
    p_all.add_argument(
        "config_dir", type=Path, help="directory containing scenario TOML files"
    )
    _add_override_args(p_all)
    return parser


def _load_with_overrides(config_path: Path, args: argparse.Namespace):
    spec = load_scenario(config_path)
    return apply_overrides(
        spec,
        epochs=args.epochs,
        cell_size=args.cell,
        seed=args.seed,
        carry_beliefs=args.carry_beliefs,
        output_dir=None,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            spec = _load_with_overrides(resolve_config_path(args.config), args)
            result = run_scenario(
                spec,
                args.out_dir,
                dump_measurements=args.dump_measurements,
                dump_beliefs=args.dump_beliefs,
            )
            print(format_summary(result))
            print(f"   outputs: {result.out_dir}")
            return 0

        # run-all
        config_dir: Path = args.config_dir
        if not config_dir.is_dir():
            raise ConfigError(f"not a directory: {config_dir}")
        config_files = sorted(config_dir.glob("*.toml"))
        if not config_files:
            raise ConfigError(f"no scenario configs (*.toml) in {config_dir}")
        specs = []
        failures: list[tuple[str, Exception]] = []
        for path in config_files:
            try:
                specs.append(_load_with_overrides(path, args))
            except ConfigError as err:
                failures.append((path.name, err))
        out_dir = args.out_dir if args.out_dir is not None else Path("results")
        results, run_failures = run_all(
            specs,
            out_dir,
            dump_measurements=args.dump_measurements,
            dump_beliefs=args.dump_beliefs,
        )
        failures.extend(run_failures)
        for result in results:
            print(format_summary(result))
        print(f"   combined outputs: {out_dir}")
        for label, err in failures:
            print(f"error: scenario {label} failed: {err}", file=sys.stderr)
        return 1 if failures else 0
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
