"""ineq-lab <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import gridio
from .config import SUBCOMMANDS, load_config
from .errors import ConfigError, IneqLabError
from .experiments import COMMANDS, RunFailed, Table

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ineq-lab", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="YAML or JSON experiment file")
    parser.add_argument("--out", help="output directory (overrides out_dir)")
    parser.add_argument("--seed", type=_u64, help="random seed (overrides seed)")
    parser.add_argument("--threads", type=_positive, default=1,
                        help="worker threads for independent parameter points")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = str(Path(args.out).resolve())
        if args.seed is not None:
            cfg.seed = args.seed
    except ConfigError as exc:
        print(f"ineq-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    header = {"command": args.subcommand, **cfg.resolved()}
    path = Path(cfg.out_dir) / f"{cfg.experiment}.csv"
    code = EXIT_OK
    try:
        table = COMMANDS[args.subcommand](cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"ineq-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunFailed as exc:
        table = exc.table
        table.status = str(exc)
        code = EXIT_NUMERIC
    except (IneqLabError, FloatingPointError, np.linalg.LinAlgError) as exc:
        table = Table(columns=("message",), rows=[], status=f"failed: {type(exc).__name__}: {exc}")
        code = EXIT_NUMERIC
    gridio.write_table(path, header, table.columns, table.rows, table.status)
    print(f"ineq-lab {args.subcommand}: {table.status} ({len(table.rows)} rows) -> {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
