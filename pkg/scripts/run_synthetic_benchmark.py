#!/usr/bin/env python3
"""Full synthetic benchmark: generate a planted suite, sweep every method
over the k grid, aggregate, and report per-instance winners.

Example (desk scale, ~15 min):

    python scripts/run_synthetic_benchmark.py --root out/bench \
        --sizes 100,200 --ranks 10,20 --seed 0

Outputs under --root:
    bundles/<label>/          generated data
    results/results.csv       one row per (bundle, method, k)
    results/aggregate.csv     mean MSE per (n, k/K ratio, method)
    results/winners.csv       lowest-MSE method per (bundle, k)
    results/runs/<...>/       factors + trace.csv per run (MSE vs time)
"""

from __future__ import annotations

import argparse
from pathlib import Path

from snmtf import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", required=True)
    parser.add_argument("--sizes", default="100,200", help="matrix orders n")
    parser.add_argument("--ranks", default="10,20", help="planted inner dimensions K")
    parser.add_argument("--N", type=int, default=5)
    parser.add_argument("--density", type=float, default=0.65)
    parser.add_argument("--methods", default="fpm,bcd,gmels,adam")
    parser.add_argument("--ratios", default="20,40,60,80,100,120")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    root = Path(args.root)
    bundles = root / "bundles"
    results = root / "results"

    for n in (int(x) for x in args.sizes.split(",")):
        for K in (int(x) for x in args.ranks.split(",")):
            out = bundles / f"n{n}_K{K}"
            if not out.exists():
                rc = cli.main([
                    "generate", "--n", str(n), "--K", str(K), "--N", str(args.N),
                    "--density", str(args.density), "--seed", str(args.seed),
                    "--out", str(out),
                ])
                if rc != 0:
                    return rc

    rc = cli.main([
        "benchmark", "--suite", str(bundles), "--methods", args.methods,
        "--ratios", args.ratios, "--seed", str(args.seed),
        "--jobs", str(args.jobs), "--out", str(results),
    ])
    if rc != 0:
        return rc
    return cli.main([
        "compare", "--results", str(results / "results.csv"),
        "--out", str(results / "winners.csv"),
    ])


if __name__ == "__main__":
    raise SystemExit(main())
