"""Figure dispatcher: ``plot <kind> --in <csv...> --out <file>``."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, FigureRecipe, render
from .schemas import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render figures from simulator CSV output",
    )
    parser.add_argument("kind", choices=sorted(FIGURE_KINDS))
    parser.add_argument(
        "--in", dest="inputs", nargs="+", required=True, metavar="CSV",
        help="input CSV file(s); overlays follow the primary file",
    )
    parser.add_argument("--out", required=True, help="output image (png/pdf/svg)")
    parser.add_argument(
        "--class", dest="emission_class", default="X",
        help="emission line for sweep-based figures (default: X)",
    )
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    recipe = FigureRecipe(
        kind=args.kind,
        inputs=tuple(args.inputs),
        out=args.out,
        emission_class=args.emission_class,
        title=args.title,
    )
    try:
        render(recipe)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
