#!/usr/bin/env python3
"""Train the reinforced potential field policy with the default recipe.

Thin wrapper over the CLI so the experiment is one command:

    python scripts/train_rpf.py --out runs/rpf --episodes 300 --seed 0
"""

import argparse
import sys

from rpfnav.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/rpf")
    parser.add_argument("--episodes", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scenario", choices=["circle", "clutter", "both"],
                        default="circle")
    args = parser.parse_args()
    return cli_main([
        "train", "--out", args.out, "--episodes", str(args.episodes),
        "--seed", str(args.seed), "--scenario", args.scenario,
    ])


if __name__ == "__main__":
    sys.exit(main())
