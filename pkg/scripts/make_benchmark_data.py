#!/usr/bin/env python3
"""Export the pattern benchmark as labeled CSVs (plus a manifest).

The files use the same format the loader ingests, so the synthetic benchmark
and real labeled CSVs share one pipeline.

Usage: python scripts/make_benchmark_data.py [--out data/pattern] [--seed 0]
"""

import argparse
from pathlib import Path

from strad.benchmarks import pattern_benchmark_config
from strad.config import build, resolve
from strad.experiments import run_synth


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/pattern")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--length", type=int, default=4000)
    args = parser.parse_args()

    doc = pattern_benchmark_config(seed=args.seed, length=args.length)
    cfg = build(resolve(doc))
    for path in run_synth(cfg, Path(args.out)):
        print(path)


if __name__ == "__main__":
    main()
