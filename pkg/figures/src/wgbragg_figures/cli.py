"""Command line wrapper: one result file in, one figure out."""

import argparse
import sys

from .io import SchemaError
from .render import RENDERERS, render_file


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="wgbragg-fig",
        description="Render a wgbragg result CSV to a PNG or SVG figure.")
    parser.add_argument("input", help="result file written by the simulator")
    parser.add_argument("--out", required=True,
                        help="figure path; extension picks the format")
    parser.add_argument("--kind", choices=RENDERERS,
                        help="override the kind recorded in the metadata")
    parser.add_argument("--overlay",
                        help="overlay table for maps (default: sibling "
                             "<stem>_overlay.csv when present)")
    args = parser.parse_args(argv)
    try:
        render_file(args.input, args.out, kind=args.kind,
                    overlay_path=args.overlay)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
