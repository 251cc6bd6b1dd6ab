"""Command line front end.

    emwave analyze --scenario ring.toml --out results/
    emwave localize --signals pmu.csv --event-window 1.0 1.4 --out results/
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analysis
from .pipeline import STAGES, PipelineConfig, run_pipeline

SUBCOMMANDS = {
    "simulate": ("simulate",),
    "decompose": ("decompose",),
    "analyze": STAGES,
    "localize": ("localize",),
    "coherency": ("coherency",),
    "rocof": ("rocof",),
}

HELP = {
    "simulate": "integrate a scenario and write signals.csv",
    "decompose": "write per-channel band components and D1 energies",
    "analyze": "full pipeline: decompose, localize, coherency, rocof",
    "localize": "rank channels by D1 energy and arrival time",
    "coherency": "partition channels into coherent groups",
    "rocof": "fit the final approximation band slope per channel",
}


def _add_common(p: argparse.ArgumentParser, analysis_flags: bool) -> None:
    src = p.add_argument_group("input (exactly one)")
    src.add_argument("--scenario", type=Path, help="TOML scenario file")
    src.add_argument("--signals", type=Path, help="CSV with header time,<label>,...")
    p.add_argument("--out", type=Path, required=True, metavar="DIR", help="output directory")
    if not analysis_flags:
        return
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--extension", choices=["symmetric", "periodic", "zero"], default="symmetric")
    p.add_argument("--event-window", nargs=2, type=float, metavar=("T0", "T1"),
                   help="localization window in seconds (default: event time + 0.4 s)")
    p.add_argument("--threshold", type=float, default=analysis.DEFAULT_THRESHOLD,
                   help="D1 detection threshold in Hz")
    p.add_argument("--theta-in", type=float, default=analysis.DEFAULT_THETA_IN)
    p.add_argument("--theta-out", type=float, default=analysis.DEFAULT_THETA_OUT)
    p.add_argument("--coherency-window", nargs=2, type=float, metavar=("T0", "T1"))
    p.add_argument("--fit-window", nargs=2, type=float, metavar=("T0", "T1"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emwave",
        description="Swing-dynamics simulation and Db4 wavelet analysis of bus-frequency records.",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="do not echo the summary")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _add_common(sub.add_parser(name, help=HELP[name]), analysis_flags=name != "simulate")
    return parser


def _window(values):
    return None if values is None else (float(values[0]), float(values[1]))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stdout)
    config = PipelineConfig(
        out=args.out,
        scenario=args.scenario,
        signals=args.signals,
        levels=getattr(args, "levels", 5),
        extension=getattr(args, "extension", "symmetric"),
        event_window=_window(getattr(args, "event_window", None)),
        threshold=getattr(args, "threshold", analysis.DEFAULT_THRESHOLD),
        theta_in=getattr(args, "theta_in", analysis.DEFAULT_THETA_IN),
        theta_out=getattr(args, "theta_out", analysis.DEFAULT_THETA_OUT),
        coherency_window=_window(getattr(args, "coherency_window", None)),
        fit_window=_window(getattr(args, "fit_window", None)),
        stages=SUBCOMMANDS[args.command],
    )
    return run_pipeline(config)


if __name__ == "__main__":
    sys.exit(main())
