"""Console entry point: render one figure from a JSON plot spec."""

from __future__ import annotations

import argparse
import sys

from .errors import PlotsError
from .render import render
from .spec import load_spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render a figure from goodhart sweep exports."
    )
    parser.add_argument("--spec", required=True, help="path to a JSON plot spec")
    args = parser.parse_args(argv)
    try:
        out = render(load_spec(args.spec))
    except PlotsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
