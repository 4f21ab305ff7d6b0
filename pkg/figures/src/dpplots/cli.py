"""Command-line interface: dp-plots <run_dir> --out <dir>."""

from __future__ import annotations

import argparse
import sys


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dp-plots", description="Render the figure set from a dp-helm run directory"
    )
    parser.add_argument("run_dir", help="directory written by `dp-helm run`")
    parser.add_argument("--out", required=True, help="output directory for images")
    args = parser.parse_args(argv)

    from .render import SchemaError, render_all

    try:
        written = render_all(args.run_dir, args.out)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
