"""Reproduce the three-method comparison and print a mean/std table.

    python scripts/run_benchmark.py --repeats 10 --seed 0 --out report.json
"""

import argparse
from pathlib import Path

from scanforest.evalharness import METHODS, run_benchmark
from scanforest.siforest import SiForestConfig
from scanforest.synthgen import GeneratorConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-ips", type=int, default=1000)
    ap.add_argument("--aggregation", choices=("extreme", "mean"), default="extreme")
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    report = run_benchmark(
        (1, 2),
        n_repeats=args.repeats,
        base_cfg=GeneratorConfig(n_ips=args.n_ips, seed=args.seed),
        forest_cfg=SiForestConfig(aggregation=args.aggregation),
    )
    print(f"{'type':>4} {'method':16} {'precision':>15} {'recall':>15} {'f2':>15}")
    for t in report.anomaly_types:
        for m in METHODS:
            cell = report.cells[t][m]
            cols = " ".join(f"{cell.mean[k]:.3f} +/- {cell.std[k]:.3f}" for k in ("precision", "recall", "f2"))
            print(f"{t:>4} {m:16} {cols}")
    if args.out:
        args.out.write_text(report.to_json())


if __name__ == "__main__":
    main()
