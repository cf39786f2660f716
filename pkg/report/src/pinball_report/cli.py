"""Command line entry point: ``report <figure-kind> --in ... --out ...``.

Exit codes: 0 on success, 2 for usage or schema problems (the schema
message includes a column diff), 1 for unexpected rendering failures.
"""

import argparse
import sys
from pathlib import Path

from .figures import RENDERERS, render
from .schemas import SchemaError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="report",
        description="Render a figure from flow-control run artifacts.")
    parser.add_argument("kind", choices=sorted(RENDERERS),
                        help="figure kind to render")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="PATH", help="input artifact files")
    parser.add_argument("--out", required=True, metavar="IMAGE",
                        help="output image path")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    for path in args.inputs:
        if not Path(path).is_file():
            print(f"error: input file not found: {path}", file=sys.stderr)
            return 2
    try:
        render(args.kind, args.inputs, args.out)
    except SchemaError as exc:
        print(f"schema mismatch in {exc.path}: {exc.diff}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
