"""Command line entry point.

Exit codes: 0 when every verdict passes, 2 when any verdict fails, 1 on
runtime or configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    OUTPUT_DIR_ENV,
    default_config,
    default_output_path,
    list_experiments,
    run,
    summarize,
)


def _parse_ladder(text: str):
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid ladder must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbmlab",
        description="Monte Carlo verification lab for path-dependent calculus "
                    "driven by fractional Brownian motion.",
    )
    parser.add_argument("--experiment", help="experiment id (see --list)")
    parser.add_argument("--hurst", type=float, help="Hurst parameter in [0.5, 1)")
    parser.add_argument("--horizon", type=float, help="time horizon T > 0")
    parser.add_argument("--grid", type=_parse_ladder, metavar="n[,2n,...]",
                        help="ascending resolution ladder; each entry divides the finest")
    parser.add_argument("--paths", type=int, help="Monte Carlo sample size M")
    parser.add_argument("--seed", type=int, help="master seed (per-path streams derive from it)")
    parser.add_argument("--functional", help="functional id for experiments that take one")
    parser.add_argument("--out", help=f"report file; defaults to ${OUTPUT_DIR_ENV}/<experiment>.<format> when that variable is set")
    parser.add_argument("--format", choices=("json", "csv"), default=None, dest="fmt")
    parser.add_argument("--workers", type=int, help="worker threads for path generation")
    parser.add_argument("--list", action="store_true", help="print the experiment catalog and exit")
    return parser


def _print_catalog():
    entries = list_experiments()
    width = max(len(e.id) for e in entries)
    for e in entries:
        defaults = ", ".join(f"{k}={v}" for k, v in sorted(e.defaults.items()))
        print(f"{e.id.ljust(width)}  {e.statement}")
        print(f"{' ' * width}  defaults: {defaults}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list:
        _print_catalog()
        return 0
    if not args.experiment:
        parser.error("--experiment is required (or use --list)")
    try:
        cfg = default_config(
            args.experiment,
            hurst=args.hurst,
            horizon=args.horizon,
            resolutions=args.grid,
            n_paths=args.paths,
            seed=args.seed,
            functional=args.functional,
            workers=args.workers,
        )
        cfg.fmt = args.fmt or "json"
        cfg.out = args.out or default_output_path(cfg.experiment, cfg.fmt)
        report = run(cfg)
    except Exception as exc:  # noqa: BLE001 - map every runtime failure to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summarize(report))
    if cfg.out:
        print(f"report written to {cfg.out}")
    return 0 if report.passed else 2


if __name__ == "__main__":
    raise SystemExit(main())
