"""Command-line entry point.

Configuration precedence: built-in subcommand defaults, then ``--config``
file, then flags. The seed comes from ``--seed``, the config file, or the
``CHRONO_SEED`` environment variable, in that order.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import experiments as ex
from .errors import CollapseError, ConfigError
from .persistence import parse_config_text, write_csv, write_record

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

COMMANDS = {
    "simulate": (ex.run_simulate, "generate a forward ensemble and write its collapse records"),
    "reverse-test": (ex.run_reverse_test, "replay records backward; KS-test the pooled PIT values"),
    "direction-test": (ex.run_direction_test, "compare forward and backward PIT pools"),
    "beamsplitter": (ex.run_beamsplitter, "exact and sampled beam-splitter photon statistics"),
    "oracle-check": (ex.run_oracle_check, "enumerated conditioned distributions vs rejection sampling"),
    "energy-drift": (ex.run_energy_drift, "mean energy gain per jump and its trend"),
    "converge": (ex.run_convergence, "fidelity of a second state driven by the same record"),
}
SEEDLESS = {"beamsplitter"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", metavar="U64", type=int, help="64-bit unsigned seed")
    common.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    common.add_argument("--alpha", metavar="REAL", type=float, help="significance level")
    common.add_argument("--trajectories", metavar="N", type=int, help="ensemble size")
    common.add_argument("--direction", choices=("forward", "backward"),
                        help="replay direction for converge")
    parser = argparse.ArgumentParser(
        prog="chronocollapse",
        description="Time-symmetric GRW collapse simulations and checks.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def resolve_config(args) -> ex.RunConfig:
    cfg = ex.default_config(args.command)
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
        cfg = cfg.merged(parse_config_text(text))
    flags = {k: getattr(args, k) for k in ("seed", "out", "alpha", "trajectories", "direction")}
    cfg = cfg.merged({k: v for k, v in flags.items() if v is not None})
    if cfg.seed is None and os.environ.get("CHRONO_SEED"):
        cfg = cfg.merged({"seed": os.environ["CHRONO_SEED"]})
    if cfg.seed is None and args.command not in SEEDLESS:
        raise ConfigError("seed", "no seed given (use --seed, the config file or CHRONO_SEED)")
    return cfg


def write_outputs(report: ex.ExperimentReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = report.name.replace("-", "_")
    (out_dir / f"{stem}_report.txt").write_bytes((report.to_text() + "\n").encode("utf-8"))
    write_csv(out_dir / f"{stem}_metrics.csv", ("metric", "value"), report.metrics.items())
    for table in report.tables:
        write_csv(out_dir / f"{stem}_{table.name}.csv", table.header, table.rows)
    if report.name == "simulate":
        rec_dir = out_dir / "records"
        rec_dir.mkdir(exist_ok=True)
        index_col = [row[0] for row in report.table("trajectories").rows]
        for idx, record in zip(index_col, report.records):
            write_record(record, rec_dir / f"record_{idx:05d}.txt")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"chronocollapse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    func, _ = COMMANDS[args.command]
    try:
        report = func(cfg)
    except ConfigError as exc:
        print(f"chronocollapse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CollapseError as exc:
        print(f"chronocollapse: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_outputs(report, Path(cfg.out))
    print(report.to_text())
    return EXIT_FAIL if report.verdict == ex.FAIL else EXIT_OK


dispatch = main


if __name__ == "__main__":
    sys.exit(main())
