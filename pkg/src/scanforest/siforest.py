"""Set-partitioned isolation forest.

Rows are individual (port, service) observations, but a node stops splitting as
soon as all of its rows belong to one IP. Row scores are then pooled per IP.
The group key is never used as a split feature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scanforest.isoforest import (
    Forest,
    ForestConfig,
    Tree,
    TreeNode,
    _check_fit_input,
    _check_forest,
    _as_matrix,
    build_trees,
    grow_tree,
    path_length,
    score_table,
    tree_streams,
)
from scanforest.preprocess import GroupedTable

AGGREGATIONS = ("extreme", "mean")


@dataclass(frozen=True)
class SiForestConfig(ForestConfig):
    aggregation: str = "extreme"
    # "c_size": group-pure leaves add c(leaf size) like any leaf; "depth": raw depth only
    pure_leaf_adjust: str = "c_size"
    # "rows": uniform row subsample; "groups": whole groups drawn in random order
    sampler: str = "rows"

    def validate(self) -> None:
        super().validate()
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if self.pure_leaf_adjust not in ("c_size", "depth"):
            raise ValueError(f"pure_leaf_adjust must be 'c_size' or 'depth', got {self.pure_leaf_adjust!r}")
        if self.sampler not in ("rows", "groups"):
            raise ValueError(f"sampler must be 'rows' or 'groups', got {self.sampler!r}")

    def forest_config(self) -> ForestConfig:
        return ForestConfig(self.n_trees, self.subsample_size, self.max_depth, self.seed)


def _group_sample(rng: np.random.Generator, codes: np.ndarray, n_groups: int, psi: int) -> np.ndarray:
    order = rng.permutation(n_groups)
    rank = np.empty(n_groups, dtype=np.int64)
    rank[order] = np.arange(n_groups)
    # rows sorted by their group's draw rank, original order inside a group
    rows = np.argsort(rank[codes], kind="stable")
    return np.sort(rows[:psi])


def fit_si_forest(table: GroupedTable, cfg: SiForestConfig | None = None, n_jobs: int = 1) -> Forest:
    cfg = cfg or SiForestConfig()
    cfg.validate()
    X = _as_matrix(table.features)
    _check_fit_input(X)
    keys, codes = np.unique(np.asarray(table.groups).astype(str), return_inverse=True)
    codes = codes.reshape(-1)
    psi = min(cfg.subsample_size, X.shape[0])
    depth = cfg.depth_limit(psi)

    def task(rng):
        def run():
            if cfg.sampler == "groups":
                idx = _group_sample(rng, codes, len(keys), psi)
            else:
                idx = np.sort(rng.choice(X.shape[0], size=psi, replace=False))
            return grow_tree(X[idx], rng, depth, groups=codes[idx], pure_leaf_adjust=cfg.pure_leaf_adjust)

        return run

    trees = build_trees([task(r) for r in tree_streams(cfg.seed, cfg.n_trees)], n_jobs)
    return Forest(tuple(trees), cfg, X.shape[1], psi, tuple(str(k) for k in keys), kind="siforest")


def si_path_length(tree: Tree | TreeNode, row) -> float:
    return path_length(tree, row)


def aggregate_by_ip(row_scores, groups, mode: str = "extreme") -> list[tuple[str, float]]:
    """Pool row scores per IP: ``extreme`` takes the max, ``mean`` the average.

    Scores are oriented higher-is-more-anomalous, so the max is the most extreme row.
    Output is sorted by IP string.
    """
    if mode not in AGGREGATIONS:
        raise ValueError(f"mode must be one of {AGGREGATIONS}, got {mode!r}")
    scores = np.asarray([s for _, s in row_scores] if _is_pairs(row_scores) else row_scores, dtype=float)
    groups = np.asarray(groups).astype(str)
    if scores.shape[0] != groups.shape[0]:
        raise ValueError(f"{scores.shape[0]} scores but {groups.shape[0]} group keys")
    if scores.size == 0:
        return []
    keys, codes = np.unique(groups, return_inverse=True)
    codes = codes.reshape(-1)
    if mode == "extreme":
        agg = np.full(len(keys), -np.inf)
        np.maximum.at(agg, codes, scores)
    else:
        agg = np.bincount(codes, weights=scores, minlength=len(keys)) / np.bincount(codes, minlength=len(keys))
    return list(zip(keys.tolist(), agg.tolist()))


def _is_pairs(row_scores) -> bool:
    return len(row_scores) > 0 and isinstance(row_scores[0], (tuple, list))


def top_k(ip_scores: list[tuple[str, float]], k: int) -> list[tuple[str, float]]:
    """Highest scores first; ties broken by IP string ascending."""
    return sorted(ip_scores, key=lambda t: (-t[1], t[0]))[:k]


def n_flagged(contamination: float, n_ips: int) -> int:
    if not 0 < contamination < 1:
        raise ValueError(f"contamination must lie in (0, 1), got {contamination}")
    return min(n_ips, math.ceil(round(contamination * n_ips, 9)))


def ip_scores(forest: Forest, table: GroupedTable, aggregation: str = "extreme") -> list[tuple[str, float]]:
    _check_forest(forest)
    return aggregate_by_ip(score_table(forest, table.features), table.groups, aggregation)


def detect_ips(
    forest: Forest,
    table: GroupedTable,
    cfg: SiForestConfig | None = None,
    contamination: float = 0.05,
) -> list[tuple[str, float]]:
    mode = cfg.aggregation if cfg is not None else getattr(forest.config, "aggregation", "extreme")
    n_flagged(contamination, 1)  # range check before the scoring pass
    scores = ip_scores(forest, table, mode)
    return top_k(scores, n_flagged(contamination, len(scores)))
