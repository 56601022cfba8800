#!/usr/bin/env python3
"""Reproduce the gamma* vs L comparison figure data.

Runs the builtin benchmark plant over the default 36-point L grid for
nu = nutilde in {0,1,2,3}, both hard and terminal-cost modes, and writes
results.csv / plot_data.csv / gamma_vs_L.svg into --out.

Equivalent to `lurebound sweep`, kept as a script for convenience.
"""

import argparse
import sys

from lurebound.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/sweep")
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--solver", choices=["embedded", "external"],
                    default="embedded")
    args = ap.parse_args()
    argv = ["sweep", "--out", args.out, "--solver", args.solver]
    if args.jobs:
        argv += ["--jobs", str(args.jobs)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
