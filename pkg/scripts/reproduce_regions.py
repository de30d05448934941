#!/usr/bin/env python3
"""Sweep the bundled scenarios at full resolution.

Produces one output directory per experiment, each holding regions.csv and
its metadata sidecar. Plotting is left to external tools; the CSVs are
self-contained (lambda2, lambda1_max, scheme, argmax policy per row).
"""

import argparse
import sys
from pathlib import Path

from cogrelay.cli import main as cli_main

EXPERIMENTS = {
    "fig2_inner_vs_noncoop": [
        "region", "--config", "fig2", "--union", "--schemes",
        "ordered_inner_dom1,ordered_inner_dom2,"
        "ordered_noncoop_dom1,ordered_noncoop_dom2",
    ],
    "fig2_tied_rho": [
        "region", "--config", "fig2", "--union", "--tie-rho", "--schemes",
        "ordered_inner_dom1,ordered_inner_dom2",
    ],
    "fig3_inner_outer": [
        "region", "--config", "fig3", "--union", "--schemes",
        "ordered_inner_dom1,ordered_inner_dom2,"
        "ordered_noncoop_dom1,ordered_noncoop_dom2,"
        "ordered_outer_dom1,ordered_outer_dom2",
    ],
    "fig4_ordered_vs_ra": [
        "region", "--config", "fig4", "--union", "--schemes",
        "ra_inner_dom1,ra_inner_dom2,ra_outer_dom1,ra_outer_dom2",
    ],
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-root", default="out")
    parser.add_argument("--grid-step", type=float, default=0.005)
    parser.add_argument("--n-starts", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=2)
    parser.add_argument("--only", default="",
                        help="comma-separated experiment names (default: all)")
    args = parser.parse_args()

    selected = [n.strip() for n in args.only.split(",") if n.strip()] or list(EXPERIMENTS)
    for name in selected:
        if name not in EXPERIMENTS:
            print(f"unknown experiment {name}; choices: {list(EXPERIMENTS)}")
            return 2
        out = Path(args.out_root) / name
        argv = EXPERIMENTS[name] + [
            "--grid-step", str(args.grid_step),
            "--n-starts", str(args.n_starts),
            "--seed", str(args.seed),
            "--workers", str(args.workers),
            "--out", str(out),
        ]
        print(f"== {name} ==")
        code = cli_main(argv)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
