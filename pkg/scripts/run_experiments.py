"""Run every shipped case study and write its CSV table under ``results/``.

Usage: python scripts/run_experiments.py [--out results] [--seed N]
"""

import argparse
import sys
import time
from pathlib import Path

from ppsc_gossip.harness.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]
RUNS = [
    ("avg.csv", ["experiment", "avg", "--config", "configs/average.yaml"]),
    ("nle.csv", ["experiment", "nle", "--config", "configs/linear_system.yaml"]),
    ("quadratic.csv", ["dco", "--config", "configs/quadratic.yaml"]),
    ("logistic.csv", ["experiment", "logistic", "--config", "configs/logistic.yaml"]),
    ("covering.csv", ["audit", "covering", "--config", "configs/average.yaml", "--trials", "100000"]),
]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(ROOT / "results"))
    parser.add_argument("--seed", type=int)
    args = parser.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, argv_run in RUNS:
        argv_run = [a if not a.startswith("configs/") else str(ROOT / a) for a in argv_run]
        if args.seed is not None:
            argv_run += ["--seed", str(args.seed)]
        start = time.perf_counter()
        code = cli(argv_run + ["--out", str(out / name)])
        print(f"{name:<14} exit={code} {time.perf_counter() - start:6.1f}s")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
