"""Three-method comparison on seeded synthetic datasets, scored by precision, recall and F2."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from scanforest.isoforest import ForestConfig, fit_forest, score_rows
from scanforest.preprocess import flatten, summarize
from scanforest.scan_model import DataError, GroundTruth, ScanDataset, build_catalog
from scanforest.siforest import (
    SiForestConfig,
    aggregate_by_ip,
    detect_ips,
    fit_si_forest,
    n_flagged,
    top_k,
)
from scanforest.synthgen import GeneratorConfig, generate_experiment

METHODS = ("flat_iforest", "summary_iforest", "siforest")
METRIC_NAMES = ("precision", "recall", "f2")


@dataclass(frozen=True)
class EvalMetrics:
    precision: float
    recall: float
    f2: float
    true_positives: int
    false_positives: int
    false_negatives: int


def f_beta(precision: float, recall: float, beta: float = 2.0) -> float:
    b2 = beta * beta
    denom = b2 * precision + recall
    return (1 + b2) * precision * recall / denom if denom > 0 else 0.0


def compute_metrics(flagged, truth: GroundTruth) -> EvalMetrics:
    flagged = set(flagged)
    unknown = sorted(ip for ip in flagged if ip not in truth)
    if unknown:
        raise DataError(f"flagged IP {unknown[0]} has no ground-truth label")
    positives = truth.anomalous()
    tp = len(flagged & positives)
    fp = len(flagged - positives)
    fn = len(positives - flagged)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return EvalMetrics(p, r, f_beta(p, r), tp, fp, fn)


def method_ip_scores(
    method: str,
    ds: ScanDataset,
    forest_cfg: SiForestConfig,
    n_jobs: int = 1,
) -> list[tuple[str, float]]:
    """Per-IP anomaly scores (sorted by IP) for one method."""
    if method == "summary_iforest":
        table = summarize(ds)
        forest = fit_forest(table.counts, forest_cfg.forest_config(), n_jobs=n_jobs)
        return sorted(zip(table.ips, score_rows(forest, table.counts).tolist()))
    flat = flatten(ds, build_catalog(ds))
    grouped = flat.grouped()
    if method == "flat_iforest":
        forest = fit_forest(grouped.features, forest_cfg.forest_config(), n_jobs=n_jobs)
        return aggregate_by_ip(score_rows(forest, grouped.features), grouped.groups, forest_cfg.aggregation)
    if method == "siforest":
        forest = fit_si_forest(grouped, forest_cfg, n_jobs=n_jobs)
        return aggregate_by_ip(score_rows(forest, grouped.features), grouped.groups, forest_cfg.aggregation)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def run_method(
    method: str,
    ds: ScanDataset,
    truth: GroundTruth,
    contamination: float,
    seed: int,
    forest_cfg: SiForestConfig | None = None,
    n_jobs: int = 1,
) -> EvalMetrics:
    cfg = replace(forest_cfg or SiForestConfig(), seed=seed)
    scores = method_ip_scores(method, ds, cfg, n_jobs)
    flagged = top_k(scores, n_flagged(contamination, len(scores)))
    return compute_metrics((ip for ip, _ in flagged), truth)


@dataclass
class CellSummary:
    runs: list[EvalMetrics]
    mean: dict[str, float]
    std: dict[str, float]


@dataclass
class BenchmarkReport:
    anomaly_types: list[int]
    seeds: list[int]
    generator: dict
    forest: dict
    contamination: float
    cells: dict[int, dict[str, CellSummary]] = field(default_factory=dict)
    ip_scores: dict = field(default_factory=dict, repr=False)

    def mean(self, anomaly_type: int, method: str, metric: str) -> float:
        return self.cells[anomaly_type][method].mean[metric]

    def to_dict(self) -> dict:
        return {
            "anomaly_types": self.anomaly_types,
            "seeds": self.seeds,
            "generator": self.generator,
            "forest": self.forest,
            "contamination": self.contamination,
            "results": {
                str(t): {
                    m: {
                        "runs": [asdict(r) | {"seed": s} for s, r in zip(self.seeds, cell.runs)],
                        "mean": cell.mean,
                        "std": cell.std,
                    }
                    for m, cell in by_method.items()
                }
                for t, by_method in self.cells.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["anomaly_type", "method", "seed", *METRIC_NAMES])
        for t, by_method in self.cells.items():
            for m, cell in by_method.items():
                for s, r in zip(self.seeds, cell.runs):
                    w.writerow([t, m, s, *(repr(getattr(r, k)) for k in METRIC_NAMES)])
        return buf.getvalue()

    def histogram_csv(self, bins: int = 20) -> str:
        """Per-IP score histograms split by label, one row per (type, method, class, bin)."""
        edges = np.linspace(0.0, 1.0, bins + 1)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["anomaly_type", "method", "label", "bin_lo", "bin_hi", "count"])
        for t, by_method in self.ip_scores.items():
            for m, groups in by_method.items():
                for label in ("normal", "anomalous"):
                    counts, _ = np.histogram(groups[label], bins=edges)
                    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                        w.writerow([t, m, label, f"{lo:.2f}", f"{hi:.2f}", int(c)])
        return buf.getvalue()


def _summarize_runs(runs: list[EvalMetrics]) -> CellSummary:
    mean = {k: statistics.fmean(getattr(r, k) for r in runs) for k in METRIC_NAMES}
    std = {k: statistics.pstdev([getattr(r, k) for r in runs]) for k in METRIC_NAMES}
    return CellSummary(runs, mean, std)


def run_benchmark(
    anomaly_type: int | tuple[int, ...] = (1, 2),
    n_repeats: int = 10,
    base_cfg: GeneratorConfig | None = None,
    forest_cfg: SiForestConfig | None = None,
    contamination: float | None = None,
    methods: tuple[str, ...] = METHODS,
    n_jobs: int = 1,
    keep_scores: bool = False,
) -> BenchmarkReport:
    """Run every method on the same dataset per seed ``base_cfg.seed + i``.

    ``contamination`` defaults to the generator's anomaly rate. The forest seed
    for repeat ``i`` equals the dataset seed.
    """
    if n_repeats < 1:
        raise ValueError(f"n_repeats must be >= 1, got {n_repeats}")
    base_cfg = base_cfg or GeneratorConfig()
    forest_cfg = forest_cfg or SiForestConfig()
    types = [anomaly_type] if isinstance(anomaly_type, int) else list(anomaly_type)
    contamination = base_cfg.anomaly_rate if contamination is None else contamination
    seeds = [base_cfg.seed + i for i in range(n_repeats)]
    report = BenchmarkReport(types, seeds, base_cfg.to_dict(), asdict(forest_cfg), contamination)
    for t in types:
        runs: dict[str, list[EvalMetrics]] = {m: [] for m in methods}
        hist: dict[str, dict[str, list[float]]] = {m: {"normal": [], "anomalous": []} for m in methods}
        for seed in seeds:
            ds, truth = generate_experiment(t, replace(base_cfg, seed=seed))
            cfg = replace(forest_cfg, seed=seed)
            for m in methods:
                scores = method_ip_scores(m, ds, cfg, n_jobs)
                flagged = top_k(scores, n_flagged(contamination, len(scores)))
                runs[m].append(compute_metrics((ip for ip, _ in flagged), truth))
                if keep_scores:
                    for ip, s in scores:
                        hist[m]["anomalous" if truth[ip].is_anomalous else "normal"].append(s)
        report.cells[t] = {m: _summarize_runs(r) for m, r in runs.items()}
        if keep_scores:
            report.ip_scores[t] = hist
    return report
