"""Exit criteria for the package, run at default scale.

Each test records a PASS/FAIL line that is printed in the pytest terminal summary.
"""

import math
from collections import Counter

import numpy as np
import pytest

from scanforest.cli import run_cli
from scanforest.evalharness import compute_metrics, f_beta, run_benchmark
from scanforest.isoforest import ForestConfig, expected_path_c, fit_forest
from scanforest.preprocess import GroupedTable, flatten, summarize
from scanforest.scan_model import GroundTruth, Label, build_catalog
from scanforest.siforest import SiForestConfig, fit_si_forest, ip_scores
from scanforest.synthgen import GeneratorConfig, generate_experiment, generate_normal


@pytest.fixture(scope="module")
def benchmark_report():
    # defaults: 1000 IPs, rate 0.05, spike x10, 3 mismatch pairs, 100 trees, 10 repeats
    return run_benchmark((1, 2), n_repeats=10, base_cfg=GeneratorConfig(seed=0))


def _f2(report, t):
    return {m: report.mean(t, m, "f2") for m in ("flat_iforest", "summary_iforest", "siforest")}


def test_criterion_1_type1_ordering(benchmark_report, criterion):
    f2 = _f2(benchmark_report, 1)
    ok = f2["summary_iforest"] > f2["siforest"] > f2["flat_iforest"] and f2["flat_iforest"] < 0.25
    detail = "type-1 F2 summary > siforest > flat, flat < 0.25 | " + ", ".join(f"{k}={v:.3f}" for k, v in f2.items())
    assert criterion(1, ok, detail), detail


def test_criterion_2_type2_ordering(benchmark_report, criterion):
    f2 = _f2(benchmark_report, 2)
    rec = {m: benchmark_report.mean(2, m, "recall") for m in f2}
    ok = (
        f2["siforest"] > f2["flat_iforest"] > f2["summary_iforest"]
        and f2["summary_iforest"] < 0.15
        and rec["siforest"] > max(rec["flat_iforest"], rec["summary_iforest"])
    )
    detail = (
        "type-2 F2 siforest > flat > summary, summary < 0.15, siforest recall highest | "
        + ", ".join(f"{k}: F2={f2[k]:.3f} R={rec[k]:.3f}" for k in f2)
    )
    assert criterion(2, ok, detail), detail


def test_criterion_3_degenerate_equivalence(criterion):
    failures = []
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(50, 400))
        X = rng.integers(0, 8, size=(n, 2)).astype(float)
        groups = np.array([f"10.{i >> 16 & 255}.{i >> 8 & 255}.{i & 255}" for i in range(n)], dtype=object)
        cfg = SiForestConfig(n_trees=25, seed=seed)
        si = fit_si_forest(GroupedTable(X, groups), cfg)
        base = fit_forest(X, cfg.forest_config())
        same_shape = [a.structure() for a in si.trees] == [b.structure() for b in base.trees]
        same_paths = all(np.array_equal(a.path_lengths(X), b.path_lengths(X)) for a, b in zip(si.trees, base.trees))
        if not (same_shape and same_paths):
            failures.append(seed)
    detail = f"distinct-IP tables give identical trees and path lengths on 20 seeds (failing seeds: {failures})"
    assert criterion(3, not failures, detail), detail


def test_criterion_4_normalization_constants(criterion):
    # 2(ln(n-1) + 0.5772156649) - 2(n-1)/n at 30 digits (mpmath)
    oracle = {3: 1.207392357586557, 4: 1.851655907136219, 5: 2.327020052039781, 256: 10.24477092011685}
    ok = [expected_path_c(n) for n in (0, 1, 2)] == [0.0, 0.0, 1.0]
    ok &= all(abs(expected_path_c(n) - v) <= 1e-9 for n, v in oracle.items())
    ok &= abs(expected_path_c(3) - 1.2074) < 5e-5
    ok &= abs(expected_path_c(4) - 1.8517) < 5e-5
    ok &= abs(expected_path_c(256) - 10.2448) < 5e-5
    detail = "c(0..2) = 0, 0, 1 and closed form within 1e-9 at n = 3, 4, 5, 256"
    assert criterion(4, ok, detail), detail


def test_criterion_5_preprocessing_conservation(criterion):
    bad = []
    for seed in range(100):
        cfg = GeneratorConfig(n_ips=20, scans_per_ip=4, anomaly_rate=0.1, seed=seed)
        ds, _ = generate_experiment(1 + seed % 2, cfg)
        flat = flatten(ds, build_catalog(ds))
        want = {ip: Counter(p) for ip, p in ds.pairs_by_ip().items()}
        got = {ip: Counter(p) for ip, p in flat.regroup().items()}
        table = summarize(ds)
        n_pairs = Counter(flat.ips.tolist())
        n = np.array([n_pairs[ip] for ip in table.ips])
        sums_ok = np.array_equal(table.port_counts().sum(1), n) and np.array_equal(table.service_counts().sum(1), n)
        if got != want or not sums_ok or len(flat) != ds.n_pairs():
            bad.append(seed)
    fig2, _ = generate_normal(GeneratorConfig(n_ips=10, scans_per_ip=20, scan_count="fixed"))
    big, _ = generate_normal(GeneratorConfig(n_ips=100, scans_per_ip=100, pairs_per_scan=(10, 10), scan_count="fixed"))
    arithmetic = len(fig2) == 200 and len(summarize(fig2)) == 10 and len(big) == 10_000 and len(flatten(big)) == 100_000
    ok = not bad and arithmetic
    detail = f"100 datasets conserve pairs and counts (bad seeds: {bad}); 10x20 -> 200 records, 100x100x10 -> 100000 rows"
    assert criterion(5, ok, detail), detail


def test_criterion_6_metric_oracle(criterion):
    truth = GroundTruth({**{ip: Label("anomalous", 2) for ip in "ab"}, **{ip: Label("normal") for ip in "cde"}})
    cases = [  # flagged, hand-counted (tp, fp, fn)
        ("", (0, 0, 2)), ("a", (1, 0, 1)), ("ab", (2, 0, 0)), ("c", (0, 1, 2)), ("ac", (1, 1, 1)),
        ("abc", (2, 1, 0)), ("cde", (0, 3, 2)), ("abcde", (2, 3, 0)), ("bd", (1, 1, 1)), ("bcde", (1, 3, 1)),
    ]
    ok = True
    for flagged, counts in cases:
        m = compute_metrics(set(flagged), truth)
        ok &= (m.true_positives, m.false_positives, m.false_negatives) == counts
        tp, fp, fn = counts
        ok &= m.precision == (tp / (tp + fp) if tp + fp else 0.0)
        ok &= m.recall == (tp / (tp + fn) if tp + fn else 0.0)
    empty = compute_metrics(set(), truth)
    ok &= empty.precision == 0.0 and empty.f2 == 0.0
    none_planted = compute_metrics({"c"}, GroundTruth({"c": Label("normal")}))
    ok &= none_planted.recall == 0.0
    ok &= abs(f_beta(0.5, 1.0) - 0.8333) <= 1e-4
    detail = "10 hand-counted fixtures, zero-denominator conventions, F2(0.5, 1.0) = 0.8333"
    assert criterion(6, ok, detail), detail


def test_criterion_7_determinism(tmp_path, criterion):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["benchmark", "--repeats", "2", "--seed", "1"]
    assert run_cli([*args, "--out", str(a)]) == 0
    assert run_cli([*args, "--out", str(b)]) == 0
    same_report = a.read_bytes() == b.read_bytes()
    ds, _ = generate_experiment(2, GeneratorConfig(n_ips=200, seed=3))
    table = flatten(ds).grouped()
    same_forests = True
    for seed in range(5):
        cfg = SiForestConfig(seed=seed)
        for fit in (lambda n: fit_si_forest(table, cfg, n_jobs=n), lambda n: fit_forest(table.features, cfg.forest_config(), n_jobs=n)):
            seq, par = fit(1), fit(4)
            same_forests &= [t.structure() for t in seq.trees] == [t.structure() for t in par.trees]
    ok = same_report and same_forests
    detail = f"benchmark JSON byte-identical: {same_report}; parallel == sequential forests on 5 seeds: {same_forests}"
    assert criterion(7, ok, detail), detail


def test_criterion_8_type2_separation(criterion):
    wins = 0
    for seed in range(10):
        ds, truth = generate_experiment(2, GeneratorConfig(seed=seed))
        table = flatten(ds).grouped()
        cfg = SiForestConfig(seed=seed)
        scores = dict(ip_scores(fit_si_forest(table, cfg), table, cfg.aggregation))
        anom = np.mean([scores[ip] for ip in truth.anomalous()])
        norm = np.mean([scores[ip] for ip in truth.normal()])
        wins += anom > norm
    ok = wins >= 9
    detail = f"planted type-2 IPs out-score normal IPs on average in {wins}/10 runs (need >= 9)"
    assert criterion(8, ok, detail), detail
