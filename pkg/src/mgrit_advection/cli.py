"""Command line: ``python -m mgrit_advection <subcommand>``.

Exit codes: 0 converged, 1 error, 2 did not converge, 3 optimizer budget
exhausted (operator still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from mgrit_advection.experiments import (
    EXIT_CONVERGED,
    EXIT_ERROR,
    ExperimentConfig,
    estimate_sweep,
    optimize_op,
    replicate_table,
    run,
)


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat 'key = value' config file; flags override it")
    for f in dataclasses.fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())


def _config_from(args) -> ExperimentConfig:
    text = Path(args.config).read_text() if args.config else ""
    overrides = {}
    for f in dataclasses.fields(ExperimentConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            overrides[f.name] = ExperimentConfig.parse_value(f.name, raw)
    return ExperimentConfig.loads(text, **overrides)


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = _config_from(args)
    report, code = run(cfg)
    print(f"{report.count_label()} iterations "
          f"(relative residual {report.relative[-1]:.3e}, {report.wall_time:.2f}s)")
    return code


def cmd_replicate(args) -> int:
    text = replicate_table(args.table, args.max_exponent, seed=args.seed,
                           coarse_override=args.coarse, allow_large=args.large)
    _emit(text, args.output)
    return EXIT_CONVERGED


def cmd_sweep(args) -> int:
    cfg = _config_from(args)
    _emit(estimate_sweep(cfg, dense=not args.no_dense), cfg.output)
    return EXIT_CONVERGED


def cmd_optimize(args) -> int:
    cfg = _config_from(args)
    if not cfg.output:
        raise ValueError("optimize-op needs --output for the operator file")
    return optimize_op(cfg, cfg.output)


def cmd_show(args) -> int:
    sys.stdout.write(_config_from(args).dumps())
    return EXIT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgrit-advection", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one configuration and report the iteration count")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replicate-table", help="iteration-count table over the grid ladder")
    p.add_argument("table", type=int, choices=(1, 2))
    p.add_argument("--max-exponent", type=int, default=8)
    p.add_argument("--large", action="store_true", help="allow grids above 2^8")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coarse", default=None, help="override every column's coarse mode")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("estimate-sweep", help="per-mode estimates as CSV")
    _add_config_flags(p)
    p.add_argument("--no-dense", action="store_true", help="skip the dense oracle columns")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize-op", help="synthesise a coarse operator and write it to a file")
    _add_config_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("show-config", help="print the effective configuration")
    _add_config_flags(p)
    p.set_defaults(func=cmd_show)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
