#!/usr/bin/env python3
"""Benchmark network sweep: output curve and per-market trades as the budget grows."""

import argparse
import sys

from hookroute.cli import main


def run():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/table1")
    parser.add_argument("--s", default="0:500:200", help="budget sweep start:stop:count")
    args = parser.parse_args()
    return main(["route", "--problem", "table1", "--s", args.s, "--out", args.out])


if __name__ == "__main__":
    sys.exit(run())
