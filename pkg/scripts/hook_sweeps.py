#!/usr/bin/env python3
"""Fill-risk sweeps: risk-penalized split per curvature/scale, plus the frontier."""

import argparse
import json
import os
import sys

from hookroute.cli import main

CONFIG = {
    "total_trade": 100.0,
    "cpmm_reserves": [100.0, 100.0],
    "hook_reserves": [100.0, 100.0],
    "curvature": 0.1,
    "variance": {"form": "linear", "scale": 1.0},
    "risk_aversion": 1.0,
}


def run():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/hooks")
    parser.add_argument("--targets", default="0:70:141", help="frontier target sweep")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    config_path = os.path.join(args.out, "config.json")
    with open(config_path, "w") as handle:
        json.dump(CONFIG, handle, indent=1)
    code = main(["hook-mean-variance", "--config", config_path, "--out", args.out])
    if code:
        return code
    return main(
        ["hook-frontier", "--config", config_path, "--grid", args.targets, "--out", args.out]
    )


if __name__ == "__main__":
    sys.exit(run())
