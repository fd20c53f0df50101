#!/usr/bin/env python3
"""Square-topology comparison runs.

Runs the square scenario family (uniform / hotspot / skew / noise / dht)
across all four strategies with paired seeds and writes CSV + SVG bundles
under runs/. Usage:

    python3 scripts/run_square.py [--scenario square-uniform] [--seeds 5]
"""

import argparse
import sys

from kadsim.cli import main as cli_main

SQUARE_SCENARIOS = ("square-uniform", "square-hotspot", "square-skew",
                    "square-noise", "square-dht")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", choices=SQUARE_SCENARIOS, default=None,
                    help="run one scenario instead of the whole family")
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    names = (args.scenario,) if args.scenario else SQUARE_SCENARIOS
    for name in names:
        rc = cli_main(["compare", "--scenario", name, "--seeds", str(args.seeds)])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
