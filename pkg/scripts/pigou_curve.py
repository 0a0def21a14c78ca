#!/usr/bin/env python3
"""Output curve for the two-link network, with and without the limit order."""

import argparse
import sys

from hookroute.cli import main


def run():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/pigou")
    parser.add_argument("--grid", default="0:20:200")
    args = parser.parse_args()
    return main(["pigou", "--grid", args.grid, "--with-order", "--out", args.out])


if __name__ == "__main__":
    sys.exit(run())
