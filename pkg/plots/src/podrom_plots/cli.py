"""podrom-plots render --kind <k> --in <csv...> --out <img> [--threshold <v>]"""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="podrom-plots")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render a figure from solver CSVs")
    p.add_argument("--kind", required=True,
                   choices=["error_series", "sv_decay", "table"])
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="CSV", help="input CSV file(s)")
    p.add_argument("--out", required=True, help="output image or html path")
    p.add_argument("--threshold", type=float, default=None,
                   help="horizontal threshold line for sv_decay")
    p.add_argument("--label", action="append", default=None,
                   help="curve label (repeat per input)")
    p.add_argument("--linear-y", action="store_true",
                   help="linear instead of logarithmic vertical axis")
    args = parser.parse_args(argv)

    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(args.inputs),
        output=args.out,
        threshold=args.threshold,
        log_y=not args.linear_y,
        labels=tuple(args.label) if args.label else (),
    )
    path = render(spec)
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
