#!/usr/bin/env python3
"""Minimal-case rigid registration noise sweep (rotation/translation error
curves vs noise level, medians over repeated trials)."""

import argparse
import sys

from momenta.cli import ExperimentConfig, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--noise", default="0:0.5:5", help="percent, start:step:stop")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="results/rigid_minimal")
    ap.add_argument("--points", type=int, default=3)
    args = ap.parse_args()
    a, step, b = (float(t) for t in args.noise.split(":"))
    levels = [a + i * step for i in range(int(round((b - a) / step)) + 1)]
    config = ExperimentConfig(
        task="rigid",
        sweep={"noise": levels, "points": [args.points]},
        options={"minimal": args.points == 3, "noise_percent": True},
        seed=args.seed,
        trials=args.trials,
        out=args.out,
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
