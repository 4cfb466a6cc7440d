"""Command line entry point: ``figurekit FIGURE_ID INPUT_DIR OUTPUT_PATH``."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_IDS, FigureInputError, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="figurekit",
        description="Render one figure from a pairtrade output directory.",
    )
    parser.add_argument("figure_id", choices=FIGURE_IDS,
                        help="which figure to render")
    parser.add_argument("input_dir",
                        help="directory holding the pairtrade CSV outputs")
    parser.add_argument("output_path",
                        help="image file to write (.png or .svg)")
    args = parser.parse_args(argv)
    try:
        result = render(args.figure_id, args.input_dir, args.output_path)
    except FigureInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.figure_id} to {result.output_path}")
    for text in result.annotations:
        print(f"  {text}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
