#!/usr/bin/env python3
"""Run the open-arena circle-swap comparisons for a trained checkpoint.

Evaluates the trained policy against the fixed-parameter field baseline on
the 8-robot radius-3 swap, runs the radius-8 generalization case (starts
beyond the detection range), and renders trajectory plots plus a metric
comparison chart:

    python scripts/compare_circle_swap.py --checkpoint runs/rpf/checkpoint.npz --out runs/swap-eval
"""

import argparse
import sys
from pathlib import Path

from rpfnav.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--out", default="runs/swap-eval")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()
    out = Path(args.out)

    jobs = [
        ("rpf-r3", ["eval", "--mode", "rpf", "--checkpoint", args.checkpoint,
                    "--scenario", "circle8-r3"]),
        ("apf-r3", ["eval", "--mode", "vanilla_apf", "--scenario", "circle8-r3"]),
        ("rpf-r8", ["eval", "--mode", "rpf", "--checkpoint", args.checkpoint,
                    "--scenario", "circle8-r8"]),
    ]
    for name, argv in jobs:
        run_dir = out / name
        code = cli_main(argv + ["--seed", str(args.seed), "--out", str(run_dir)])
        if code != 0:
            return code
        code = cli_main(["plot", "--trajectory", str(run_dir / "trajectory.txt"),
                         "--scenario", str(run_dir / "scenario.json"),
                         "--title", name, "--out", str(run_dir / "trails.svg")])
        if code != 0:
            return code

    return cli_main(["plot",
                     "--reports", str(out / "rpf-r3" / "report.json"),
                     str(out / "apf-r3" / "report.json"),
                     "--out", str(out / "metrics-r3.svg")])


if __name__ == "__main__":
    sys.exit(main())
