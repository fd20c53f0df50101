#!/usr/bin/env python3
"""Real-world (city ping fixture) comparison runs.

Runs the real-world scenario family, including the adversarial and
iterative variants, and writes CSV + SVG bundles under runs/. Usage:

    python3 scripts/run_real_world.py [--scenario rw-uniform] [--seeds 5]
"""

import argparse
import sys

from kadsim.cli import main as cli_main

RW_SCENARIOS = ("rw-uniform", "rw-hotspot", "rw-skew", "rw-noise",
                "rw-adv-random", "rw-adv-concentrated", "rw-dht",
                "rw-iterative")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", choices=RW_SCENARIOS, default=None,
                    help="run one scenario instead of the whole family")
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    names = (args.scenario,) if args.scenario else RW_SCENARIOS
    for name in names:
        rc = cli_main(["compare", "--scenario", name, "--seeds", str(args.seeds)])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
