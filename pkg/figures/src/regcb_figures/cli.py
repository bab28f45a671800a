"""Command line front end: one figure kind from one results directory."""

import argparse
import sys

import matplotlib.pyplot as plt

from .csvio import FigureInputError
from .render import KINDS, render

EXIT_OK = 0
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render_figs",
        description="Render bandit experiment CSV logs into a figure.",
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument(
        "--in",
        dest="in_dir",
        required=True,
        help="directory holding the delimited results",
    )
    parser.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        fig = render(args.kind, args.in_dir, args.out)
    except FigureInputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    plt.close(fig)
    print(f"{args.kind} figure -> {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
