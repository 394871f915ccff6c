"""Command line for regenerating the campaign figures.

Exit codes: 0 success, 1 bad input data, 2 usage errors.
"""

from __future__ import annotations

import argparse
import sys

from .figures import CsvFormatError, plot_power_sweep, plot_user_sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solaruav-plots",
        description="Render error-bar charts from campaign result CSVs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("power-sweep", "mean objective vs transmit power budget (dBm)"),
        ("user-sweep", "mean objective vs number of users"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--csv", required=True, help="campaign result CSV")
        p.add_argument("--out", required=True, help="output image (.png or .svg)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "power-sweep":
            plot_power_sweep(args.csv, args.out)
        else:
            plot_user_sweep(args.csv, args.out)
    except (CsvFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
