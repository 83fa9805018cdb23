"""Command-line front end: ntkln-plot."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotJob, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntkln-plot",
        description="Render ntkln experiment CSVs into figures")
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--input", action="append", required=True,
                        help="input CSV (repeat for multiple panels/lines)")
    parser.add_argument("--label", action="append", default=[],
                        help="label per input, in order")
    parser.add_argument("--train", default=None,
                        help="training-points CSV (x,y) overlaid as dots")
    parser.add_argument("--title", default="")
    parser.add_argument("--output", required=True, help="image path (png/svg)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = PlotJob(inputs=tuple(args.input), output=args.output,
                  kind=args.kind, labels=tuple(args.label),
                  train_csv=args.train, title=args.title)
    try:
        path = render(job)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
