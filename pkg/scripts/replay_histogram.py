#!/usr/bin/env python3
"""Before/after latency histogram with a replayed query window.

Runs the square-replay preset: 200k rounds where the last `window` rounds
replay the first `window` rounds exactly, so the two histograms compare
identical workloads before and after learning. Usage:

    python3 scripts/replay_histogram.py [--window 1000] [--seed 0] [--out runs/square-replay]
"""

import argparse
import os
import sys

import numpy as np

from kadsim.harness import (
    before_after_histogram,
    build_shared,
    plot_before_after,
    write_json,
)
from kadsim.scenarios import scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--window", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=os.path.join("runs", "square-replay"))
    args = ap.parse_args()

    cfg = scenario("square-replay", seed=args.seed)
    shared = build_shared(cfg, cfg.seed)
    os.makedirs(args.out, exist_ok=True)
    report = {"window": args.window, "rounds": cfg.rounds, "p90": {}}
    for strategy in cfg.strategies:
        first, last, ratio, _ = before_after_histogram(
            cfg, args.window, strategy=strategy, shared=shared)
        report["p90"][strategy] = {
            "first": float(np.percentile(first, 90)),
            "last": float(np.percentile(last, 90)),
            "ratio": ratio,
        }
        plot_before_after(first, last,
                          os.path.join(args.out, f"before_after_{strategy}.svg"),
                          f"{cfg.name}: {strategy}")
        print(f"{strategy}: p90 ratio last/first = {ratio:.4f}")
    write_json(report, os.path.join(args.out, "replay.json"))
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
