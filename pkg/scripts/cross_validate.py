#!/usr/bin/env python3
"""End-to-end cross-check: analytical bounds against coupled simulations.

Runs the `validate` command on a scenario (interior points of the inner
bound must simulate stable, points pushed past the outer bound must not),
then probes one hand-picked point with a full simulation report.
"""

import argparse
import sys

from cogrelay.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="fig3")
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--slots", type=int, default=400_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=2)
    args = parser.parse_args()

    code = cli_main([
        "validate", "--config", args.config, "--k", str(args.k),
        "--slots", str(args.slots), "--seed", str(args.seed),
        "--workers", str(args.workers),
    ])
    if code != 0:
        return code

    print("\n== spot check: moderate symmetric load, cooperative policy ==")
    return cli_main([
        "simulate", "--config", args.config,
        "--lambda1", "0.15", "--lambda2", "0.15",
        "--eps", "0.5", "--rho", "0.5", "--p1", "0.6", "--p2", "0.6",
        "--f1", "0.5", "--f2", "0.5",
        "--slots", str(args.slots), "--seed", str(args.seed),
    ])


if __name__ == "__main__":
    sys.exit(main())
