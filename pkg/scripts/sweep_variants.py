"""Mean F2 of every method under each siForest switch combination.

Covers leaf correction (c_size / depth), subsampler (rows / groups) and
aggregation (extreme / mean).
"""

import argparse
import itertools

from scanforest.evalharness import METHODS, run_benchmark
from scanforest.siforest import SiForestConfig
from scanforest.synthgen import GeneratorConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--n-ips", type=int, default=1000)
    args = ap.parse_args()
    grid = itertools.product(("c_size", "depth"), ("rows", "groups"), ("extreme", "mean"))
    for adjust, sampler, agg in grid:
        cfg = SiForestConfig(pure_leaf_adjust=adjust, sampler=sampler, aggregation=agg)
        report = run_benchmark((1, 2), n_repeats=args.repeats, base_cfg=GeneratorConfig(n_ips=args.n_ips), forest_cfg=cfg)
        for t in (1, 2):
            f2 = " ".join(f"{m}={report.mean(t, m, 'f2'):.3f}" for m in METHODS)
            print(f"{adjust:6} {sampler:6} {agg:7} type {t}: {f2}")


if __name__ == "__main__":
    main()
