import json
from dataclasses import replace

import pytest
from hypothesis import assume, given, strategies as st

from scanforest.evalharness import (
    METHODS,
    compute_metrics,
    f_beta,
    method_ip_scores,
    run_benchmark,
    run_method,
)
from scanforest.scan_model import DataError, GroundTruth, Label
from scanforest.siforest import SiForestConfig
from scanforest.synthgen import GeneratorConfig, generate_experiment, generate_normal

FAST = SiForestConfig(n_trees=20)


def truth_of(anomalous, normal):
    labels = {ip: Label("anomalous", 1) for ip in anomalous}
    labels.update({ip: Label("normal") for ip in normal})
    return GroundTruth(labels)


FIVE = truth_of(["a", "b"], ["c", "d", "e"])

# (flagged, tp, fp, fn), counted by hand against FIVE (a, b anomalous)
CASES = [
    (set(), 0, 0, 2),
    ({"a"}, 1, 0, 1),
    ({"a", "b"}, 2, 0, 0),
    ({"c"}, 0, 1, 2),
    ({"a", "c"}, 1, 1, 1),
    ({"a", "b", "c"}, 2, 1, 0),
    ({"c", "d", "e"}, 0, 3, 2),
    ({"a", "b", "c", "d", "e"}, 2, 3, 0),
    ({"b", "d"}, 1, 1, 1),
    ({"b", "c", "d", "e"}, 1, 3, 1),
]


@pytest.mark.parametrize("flagged, tp, fp, fn", CASES)
def test_metric_counts(flagged, tp, fp, fn):
    m = compute_metrics(flagged, FIVE)
    assert (m.true_positives, m.false_positives, m.false_negatives) == (tp, fp, fn)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    assert m.precision == p and m.recall == r


def test_zero_denominators():
    m = compute_metrics(set(), FIVE)
    assert m.precision == 0.0 and m.f2 == 0.0
    m = compute_metrics({"c"}, truth_of([], ["c", "d"]))
    assert m.recall == 0.0 and m.precision == 0.0 and m.f2 == 0.0


def test_unknown_flag():
    with pytest.raises(DataError):
        compute_metrics({"zz"}, FIVE)


def test_f2_values():
    assert f_beta(0.5, 1.0) == pytest.approx(0.8333, abs=1e-4)
    assert f_beta(0.404, 0.709) == pytest.approx(0.6159914, abs=1e-6)
    assert f_beta(0.3, 0.3) == pytest.approx(0.3)


@given(p=st.floats(0.01, 1), r1=st.floats(0.01, 1), r2=st.floats(0.01, 1))
def test_f2_increasing_in_recall(p, r1, r2):
    assume(abs(r1 - r2) > 1e-6)
    lo, hi = sorted((r1, r2))
    assert f_beta(p, lo) < f_beta(p, hi)


@given(p=st.floats(0.01, 1), r=st.floats(0.01, 1))
def test_f2_favours_recall(p, r):
    assume(r > p + 1e-6)
    assert f_beta(p, r) > f_beta(p, r, beta=1.0)
    assert 0 <= f_beta(p, r) <= 1


@pytest.fixture(scope="module")
def small_experiment():
    return generate_experiment(2, GeneratorConfig(n_ips=80, scans_per_ip=6, seed=2))


@pytest.mark.parametrize("method", METHODS)
def test_run_method_deterministic(method, small_experiment):
    ds, truth = small_experiment
    a = run_method(method, ds, truth, 0.05, seed=3, forest_cfg=FAST)
    b = run_method(method, ds, truth, 0.05, seed=3, forest_cfg=FAST)
    assert a == b
    assert a.true_positives + a.false_negatives == len(truth.anomalous())
    assert a.true_positives + a.false_positives == 4


@pytest.mark.parametrize("method", METHODS)
def test_no_planted_anomalies(method):
    ds, truth = generate_normal(GeneratorConfig(n_ips=30, scans_per_ip=4, seed=1))
    m = run_method(method, ds, truth, 0.1, seed=0, forest_cfg=FAST)
    assert (m.precision, m.recall, m.true_positives) == (0.0, 0.0, 0)


@pytest.mark.parametrize("method", METHODS)
def test_all_anomalous(method, small_experiment):
    ds, truth = small_experiment
    every = truth.with_labels(truth.labels, 2)
    assert run_method(method, ds, every, 0.2, seed=0, forest_cfg=FAST).precision == 1.0


def test_method_scores_cover_every_ip(small_experiment):
    ds, _ = small_experiment
    for method in METHODS:
        scores = method_ip_scores(method, ds, FAST)
        assert [ip for ip, _ in scores] == sorted(ds.ips())
        assert all(0 < s <= 1 for _, s in scores)
    with pytest.raises(ValueError):
        method_ip_scores("kmeans", ds, FAST)


def test_benchmark_single_repeat():
    cfg = GeneratorConfig(n_ips=60, scans_per_ip=5, seed=4)
    report = run_benchmark(1, n_repeats=1, base_cfg=cfg, forest_cfg=FAST)
    for method in METHODS:
        cell = report.cells[1][method]
        assert len(cell.runs) == 1
        assert cell.mean["f2"] == cell.runs[0].f2
        assert cell.std == {"precision": 0.0, "recall": 0.0, "f2": 0.0}


def test_benchmark_shape_and_outputs():
    cfg = GeneratorConfig(n_ips=60, scans_per_ip=5, seed=10)
    report = run_benchmark((1, 2), n_repeats=3, base_cfg=cfg, forest_cfg=FAST, keep_scores=True)
    assert report.seeds == [10, 11, 12]
    doc = json.loads(report.to_json())
    for t in ("1", "2"):
        assert set(doc["results"][t]) == set(METHODS)
        for cell in doc["results"][t].values():
            assert [r["seed"] for r in cell["runs"]] == [10, 11, 12]
            assert cell["mean"]["f2"] == pytest.approx(sum(r["f2"] for r in cell["runs"]) / 3)
    rows = report.to_csv().splitlines()
    assert rows[0] == "anomaly_type,method,seed,precision,recall,f2"
    assert len(rows) == 1 + 2 * 3 * 3
    hist = report.histogram_csv(bins=10).splitlines()
    assert hist[0] == "anomaly_type,method,label,bin_lo,bin_hi,count"
    assert len(hist) == 1 + 2 * 3 * 2 * 10
    # one entry per IP per seed lands in the histogram
    total = sum(int(line.rsplit(",", 1)[1]) for line in hist[1:] if line.startswith("1,siforest"))
    assert total == 60 * 3


def test_benchmark_uses_same_data_for_all_methods(monkeypatch):
    import scanforest.evalharness as eh

    seen = []
    real = eh.method_ip_scores

    def spy(method, ds, cfg, n_jobs=1):
        seen.append((method, id(ds), cfg.seed))
        return real(method, ds, cfg, n_jobs)

    monkeypatch.setattr(eh, "method_ip_scores", spy)
    run_benchmark(2, n_repeats=2, base_cfg=GeneratorConfig(n_ips=40, scans_per_ip=3), forest_cfg=FAST)
    by_seed = {}
    for method, ds_id, seed in seen:
        by_seed.setdefault(seed, set()).add(ds_id)
    assert len(seen) == 6
    assert all(len(ids) == 1 for ids in by_seed.values())


def test_benchmark_rejects_zero_repeats():
    with pytest.raises(ValueError):
        run_benchmark(1, n_repeats=0)
