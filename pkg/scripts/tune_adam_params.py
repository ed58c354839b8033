#!/usr/bin/env python3
"""Random-search tuning of the adam hyper-parameters on a planted suite.

Generates a small suite (unless --suite points at an existing one), samples
(alpha, beta1, beta2) triples, scores each by the worst mean MSE across the
suite (3 random-start runs per problem), and writes one CSV row per trial.

    python scripts/tune_adam_params.py --root out/tune --trials 100 --seed 0
"""

from __future__ import annotations

import argparse
from pathlib import Path

from snmtf import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", required=True)
    parser.add_argument("--suite", default=None, help="existing bundle suite to reuse")
    parser.add_argument("--sizes", default="60,100", help="matrix orders for a fresh suite")
    parser.add_argument("--ranks", default="6,10", help="planted K values for a fresh suite")
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--runs", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    root = Path(args.root)
    suite = Path(args.suite) if args.suite else root / "bundles"
    if args.suite is None:
        for n, K in zip(
            (int(x) for x in args.sizes.split(",")),
            (int(x) for x in args.ranks.split(",")),
        ):
            out = suite / f"n{n}_K{K}"
            if not out.exists():
                rc = cli.main([
                    "generate", "--n", str(n), "--K", str(K),
                    "--seed", str(args.seed), "--out", str(out),
                ])
                if rc != 0:
                    return rc

    return cli.main([
        "tune", "--suite", str(suite), "--trials", str(args.trials),
        "--runs", str(args.runs), "--seed", str(args.seed),
        "--out", str(root / "tune.csv"),
    ])


if __name__ == "__main__":
    raise SystemExit(main())
