#!/usr/bin/env python3
"""Solve the liquidation program and simulate inventory paths per carry cost.

Writes one run directory per inventory-cost level so the trajectories can be
overlaid, plus the time-zero value/policy slice for the heat maps.
"""

import argparse
import json
import os
import sys

from hookroute.cli import main

BASE_CONFIG = {
    "mdp": {
        "horizon": 200,
        "inventory": 1000.0,
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
    "mispricing": {"drift": 0.0, "volatility": 8.0, "dt": 1.0},
    "z0": 0.0,
}


def run():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/liquidation")
    parser.add_argument("--paths", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument(
        "--inventory-costs", default="0,0.1,1,10", help="comma-separated carry levels"
    )
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for cost in (float(c) for c in args.inventory_costs.split(",")):
        config = json.loads(json.dumps(BASE_CONFIG))
        config["mdp"]["inventory_cost"] = cost
        run_dir = os.path.join(args.out, f"carry_{cost:g}")
        os.makedirs(run_dir, exist_ok=True)
        config_path = os.path.join(run_dir, "config.json")
        with open(config_path, "w") as handle:
            json.dump(config, handle, indent=1)
        code = main(["liquidate-solve", "--config", config_path, "--out", run_dir])
        if code:
            return code
        code = main(
            [
                "liquidate-simulate",
                "--config", config_path,
                "--paths", str(args.paths),
                "--seed", str(args.seed),
                "--out", run_dir,
            ]
        )
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
