"""Command-line entry: one subcommand per figure kind."""

from __future__ import annotations

import argparse
import sys

from .plots import plot_convergence, plot_energy, plot_hysteresis, plot_portrait


def _cmd_convergence(args) -> int:
    slopes = plot_convergence(args.reports, args.out, title=args.title)
    for scheme, slope in slopes.items():
        print(f"{scheme}: fitted slope {slope:.2f}")
    return 0


def _cmd_energy(args) -> int:
    plot_energy(args.logs, args.out, labels=args.labels, title=args.title)
    print(f"wrote {args.out}")
    return 0


def _cmd_portrait(args) -> int:
    times = plot_portrait(args.snapshots, args.out, field=args.field,
                          title=args.title)
    print(f"wrote {args.out} ({len(times)} panels)")
    return 0


def _cmd_hysteresis(args) -> int:
    asym = plot_hysteresis(args.log, args.out, ramp_fraction=args.ramp_fraction,
                           title=args.title)
    print(f"wrote {args.out} (asymmetry {asym:.3f})")
    return 0


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figgen", description="Figures from simulator output files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convergence", help="log-log ladder plot with slopes")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--title", default=None)
    p.set_defaults(fn=_cmd_convergence)

    p = sub.add_parser("energy", help="energy decay + species means")
    p.add_argument("logs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", nargs="*", default=None)
    p.add_argument("--title", default=None)
    p.set_defaults(fn=_cmd_energy)

    p = sub.add_parser("portrait", help="phase portraits in time order")
    p.add_argument("snapshots", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--field", choices=("AB", "S"), default="AB")
    p.add_argument("--title", default=None)
    p.set_defaults(fn=_cmd_portrait)

    p = sub.add_parser("hysteresis", help="ramp-up vs mirrored ramp-down")
    p.add_argument("log")
    p.add_argument("--out", required=True)
    p.add_argument("--ramp-fraction", type=float, default=0.25)
    p.add_argument("--title", default=None)
    p.set_defaults(fn=_cmd_hysteresis)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.fn(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
