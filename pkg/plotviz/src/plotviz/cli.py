"""Standalone chart script: ``plot convergence <csv> <out>``, ``plot errorbars <csv> <out>``."""

from __future__ import annotations

import argparse
import sys

from .charts import render_convergence_chart, render_error_bars
from .io import PlotDataError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("convergence", "proportion curves from algorithm,t,converge_proportion"),
        ("errorbars", "batch error bars from algorithm,batch,t,converge_proportion"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("csv")
        cmd.add_argument("out_image")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convergence":
            series = render_convergence_chart(args.csv, args.out_image)
            print(f"{args.out_image}: {len(series)} curve(s)")
        else:
            stats = render_error_bars(args.csv, args.out_image)
            print(f"{args.out_image}: {len(stats)} panel(s)")
    except (PlotDataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
