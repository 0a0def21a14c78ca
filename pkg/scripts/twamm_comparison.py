#!/usr/bin/env python3
"""Volatility sweep: optimal schedule vs the uniform-split benchmark."""

import argparse
import json
import os
import sys

from hookroute.cli import main

CONFIG = {
    "mdp": {
        "horizon": 100,
        "inventory": 100.0,
        "gas": 2.0,
        "inventory_cost": 0.1,
        "discount": 0.01,
    },
    "pool": {
        "reserve_in": 1e5,
        "reserve_out": 5000 * 1e5,
        "fee_bound_upper": 0.003,
        "fee_bound_lower": 0.003,
    },
    "mispricing": {"drift": 0.0, "volatility": 0.0, "dt": 1.0},
    "z0": -0.003,
}


def run():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/twamm")
    parser.add_argument("--grid", default="0:8:9", help="volatility sweep start:stop:count")
    parser.add_argument("--paths", type=int, default=500)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    config_path = os.path.join(args.out, "config.json")
    with open(config_path, "w") as handle:
        json.dump(CONFIG, handle, indent=1)
    return main(
        [
            "compare-twamm",
            "--config", config_path,
            "--grid", args.grid,
            "--paths", str(args.paths),
            "--seed", str(args.seed),
            "--out", args.out,
        ]
    )


if __name__ == "__main__":
    sys.exit(run())
