"""Command-line entry point: one subcommand per experiment kind.

    treetops <kind> --config cfg.toml [--seed S] [--threads T] [--out DIR]
                    [--budget WORDS]

Exit codes: 0 success, 2 invalid configuration, 3 budget refusal. Thread
precedence: --threads flag, then the TREETOPS_THREADS environment variable,
then the config file, then 1.
"""

from __future__ import annotations

import argparse
import os
import sys

from .exp_runner import KINDS, ConfigError, load_config, run
from .tree_sampler import BudgetError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3

_ENV_THREADS = "TREETOPS_THREADS"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treetops",
        description="Extremal statistics experiments on hierarchical Gaussian fields.")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="KIND")
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", required=True, help="TOML experiment config")
        sp.add_argument("--seed", type=int, default=None,
                        help="override master_seed from the config")
        sp.add_argument("--threads", type=int, default=None,
                        help="override thread count (also: TREETOPS_THREADS)")
        sp.add_argument("--out", default=None, help="override output prefix")
        sp.add_argument("--budget", type=int, default=None,
                        help="override per-replicate Gaussian word budget")
    return parser


def _resolve_threads(flag_value):
    if flag_value is not None:
        return flag_value
    env = os.environ.get(_ENV_THREADS)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError("threads", f"{_ENV_THREADS}={env!r} is not an integer") from None
    return None


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, kind=args.kind, seed=args.seed,
                          threads=_resolve_threads(args.threads),
                          out=args.out, budget=args.budget)
        result = run(cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as e:
        print(f"error: budget refused: {e}", file=sys.stderr)
        return EXIT_BUDGET
    print(f"{result.kind} [{result.config_hash}] -> {result.run_dir}")
    print(f"  rows: {len(result.rows)}  draws: {result.draws}  "
          f"wall: {result.wall_seconds:.2f}s")
    for row in result.rows:
        se = f" +- {row.stderr:.4g}" if row.stderr is not None else ""
        oracle = f"  (oracle {row.oracle:.6g})" if row.oracle is not None else ""
        print(f"  N={row.N:<4d} {row.statistic:<22s} {row.estimate:.6g}{se}{oracle}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
