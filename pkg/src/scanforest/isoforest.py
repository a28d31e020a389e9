"""Isolation Forest built from scratch on numpy arrays.

Trees are stored as flat node arrays (preorder, left child first). Scores follow
the usual orientation: higher means more anomalous, ``s = 2 ** (-E[h] / c(psi))``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

EULER_GAMMA = 0.5772156649
FORMAT_NAME = "scanforest-forest"
FORMAT_VERSION = 1


class InsufficientDataError(ValueError):
    pass


class SchemaError(ValueError):
    pass


class NotFittedError(RuntimeError):
    pass


def expected_path_c(n: int) -> float:
    """Average unsuccessful-search path length in a BST of ``n`` points."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    subsample_size: int = 256
    max_depth: int | None = None  # None -> ceil(log2(effective subsample size))
    seed: int = 0

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.subsample_size < 2:
            raise ValueError(f"subsample_size must be >= 2, got {self.subsample_size}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a non-negative 64-bit integer, got {self.seed}")

    def depth_limit(self, psi: int) -> int:
        if self.max_depth is not None:
            return self.max_depth
        return max(1, math.ceil(math.log2(psi)))


# -- node views -------------------------------------------------------------


@dataclass(frozen=True)
class External:
    size: int
    group: str | None = None  # set only on group-pure leaves of set-partitioned trees


@dataclass(frozen=True)
class Internal:
    feature: int
    split_value: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Internal, External]


@dataclass(frozen=True)
class Tree:
    """Array-backed binary partition tree.

    ``feature[i] == -1`` marks a leaf. Rows with ``x[feature] < threshold`` go left.
    ``adjust[i]`` is the path-length correction added at leaf ``i``.
    ``group[i]`` indexes the forest's group keys for group-pure leaves, else -1.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray
    adjust: np.ndarray
    group: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] < 0

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def max_depth(self) -> int:
        return int(self.depth.max())

    def structure(self) -> tuple:
        """Hashable topology and splits; ignores group annotations."""
        return (
            tuple(self.feature.tolist()),
            tuple(None if f < 0 else v for f, v in zip(self.feature.tolist(), self.threshold.tolist())),
            tuple(self.left.tolist()),
            tuple(self.right.tolist()),
            tuple(self.size.tolist()),
        )

    def leaf_of(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] < self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        leaf = self.leaf_of(X)
        return self.depth[leaf] + self.adjust[leaf]

    def to_nodes(self, group_keys: Sequence[str] = ()) -> TreeNode:
        def build(i: int) -> TreeNode:
            if self.feature[i] < 0:
                g = int(self.group[i])
                return External(int(self.size[i]), group_keys[g] if g >= 0 and group_keys else None)
            return Internal(
                int(self.feature[i]),
                float(self.threshold[i]),
                build(int(self.left[i])),
                build(int(self.right[i])),
            )

        return build(0)

    @classmethod
    def from_nodes(cls, root: TreeNode) -> "Tree":
        feat, thr, left, right, size, depth, group = [], [], [], [], [], [], []

        def visit(node: TreeNode, d: int) -> tuple[int, int]:
            i = len(feat)
            depth.append(d)
            group.append(-1)
            if isinstance(node, External):
                feat.append(-1), thr.append(np.nan), left.append(-1), right.append(-1)
                size.append(node.size)
                return i, node.size
            feat.append(node.feature), thr.append(node.split_value)
            left.append(-1), right.append(-1), size.append(0)
            li, ls = visit(node.left, d + 1)
            ri, rs = visit(node.right, d + 1)
            left[i], right[i], size[i] = li, ri, ls + rs
            return i, ls + rs

        visit(root, 0)
        sizes = np.array(size, dtype=np.int64)
        feature = np.array(feat, dtype=np.int64)
        adjust = np.where(feature < 0, [expected_path_c(int(s)) for s in sizes], 0.0)
        return cls(
            feature,
            np.array(thr, dtype=float),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            sizes,
            np.array(depth, dtype=np.int64),
            adjust.astype(float),
            np.array(group, dtype=np.int64),
        )


# -- construction -----------------------------------------------------------


def grow_tree(
    X: np.ndarray,
    rng: np.random.Generator,
    max_depth: int,
    groups: np.ndarray | None = None,
    pure_leaf_adjust: str = "c_size",
) -> Tree:
    """Grow one tree on all rows of ``X``.

    Stops at single rows, rows with no splittable feature, or ``max_depth``.
    With ``groups`` (integer codes per row) a node whose rows share one code
    also stops; such leaves remember the code. ``pure_leaf_adjust="depth"``
    drops the c(size) correction on those group-pure leaves.

    RNG consumption per internal node, in preorder: one integer for the feature
    (among splittable ones, ascending), then one uniform for the split value.
    """
    feat, thr, left, right, size, depth, adjust, group = ([] for _ in range(8))

    def leaf(n: int, d: int, g: int) -> int:
        i = len(feat)
        feat.append(-1), thr.append(np.nan), left.append(-1), right.append(-1)
        size.append(n), depth.append(d), group.append(g)
        adjust.append(0.0 if (g >= 0 and pure_leaf_adjust == "depth") else expected_path_c(n))
        return i

    def build(idx: np.ndarray, d: int) -> int:
        n = idx.size
        g = -1
        if groups is not None:
            first = groups[idx[0]]
            if np.all(groups[idx] == first):
                g = int(first)
                return leaf(n, d, g)
        if n <= 1 or d >= max_depth:
            return leaf(n, d, g)
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if splittable.size == 0:
            return leaf(n, d, g)
        f = int(splittable[rng.integers(splittable.size)])
        v = float(rng.uniform(lo[f], hi[f]))
        if v <= lo[f]:
            v = float(np.nextafter(lo[f], hi[f]))
        i = len(feat)
        feat.append(f), thr.append(v), left.append(-1), right.append(-1)
        size.append(n), depth.append(d), adjust.append(0.0), group.append(-1)
        mask = sub[:, f] < v
        left[i] = build(idx[mask], d + 1)
        right[i] = build(idx[~mask], d + 1)
        return i

    build(np.arange(len(X)), 0)
    return Tree(
        np.array(feat, dtype=np.int64),
        np.array(thr, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(size, dtype=np.int64),
        np.array(depth, dtype=np.int64),
        np.array(adjust, dtype=float),
        np.array(group, dtype=np.int64),
    )


@dataclass(frozen=True)
class Forest:
    trees: tuple[Tree, ...]
    config: ForestConfig
    n_features: int
    subsample_size: int  # effective psi used for every tree
    group_keys: tuple[str, ...] = ()
    kind: str = "iforest"
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.trees)


def _as_matrix(table) -> np.ndarray:
    X = np.asarray(table, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if X.size else X.reshape(0, 0)
    if X.ndim != 2:
        raise SchemaError(f"expected a 2-D table, got shape {X.shape}")
    return X


def tree_streams(seed: int, n_trees: int) -> list[np.random.Generator]:
    """Independent per-tree generators; tree k's stream does not depend on build order."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_trees)]


def _check_fit_input(X: np.ndarray) -> None:
    if X.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 rows to fit, got {X.shape[0]}")
    if X.shape[1] < 1:
        raise SchemaError("table has no feature columns")


def build_trees(tasks, n_jobs: int) -> list[Tree]:
    if n_jobs == 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
        return list(pool.map(lambda t: t(), tasks))


def fit_forest(table, cfg: ForestConfig | None = None, n_jobs: int = 1) -> Forest:
    cfg = cfg or ForestConfig()
    cfg.validate()
    X = _as_matrix(table)
    _check_fit_input(X)
    psi = min(cfg.subsample_size, X.shape[0])
    depth = cfg.depth_limit(psi)

    def task(rng):
        def run():
            idx = np.sort(rng.choice(X.shape[0], size=psi, replace=False))
            return grow_tree(X[idx], rng, depth)

        return run

    trees = build_trees([task(r) for r in tree_streams(cfg.seed, cfg.n_trees)], n_jobs)
    return Forest(tuple(trees), cfg, X.shape[1], psi)


# -- scoring ----------------------------------------------------------------


def path_length(tree: Tree | TreeNode, row) -> float:
    if not isinstance(tree, Tree):
        tree = Tree.from_nodes(tree)
    x = np.asarray(row, dtype=float).reshape(1, -1)
    used = tree.feature[tree.feature >= 0]
    if used.size and x.shape[1] <= used.max():
        raise SchemaError(f"row has {x.shape[1]} features; tree splits on feature {used.max()}")
    return float(tree.path_lengths(x)[0])


def _check_forest(forest) -> None:
    if not isinstance(forest, Forest) or not forest.trees:
        raise NotFittedError("forest is not fitted")


def mean_path_lengths(forest: Forest, table) -> np.ndarray:
    _check_forest(forest)
    X = _as_matrix(table)
    if X.shape[0] == 0:
        return np.empty(0)
    if X.shape[1] != forest.n_features:
        raise SchemaError(f"table has {X.shape[1]} features, forest expects {forest.n_features}")
    # rows with identical features always share a leaf; score each distinct row once
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    total = np.zeros(len(uniq))
    for tree in forest.trees:
        total += tree.path_lengths(uniq)
    return (total / len(forest.trees))[inverse.reshape(-1)]


def score_from_paths(mean_paths: np.ndarray, psi: int) -> np.ndarray:
    return np.power(2.0, -np.asarray(mean_paths, dtype=float) / expected_path_c(psi))


def score_rows(forest: Forest, table) -> np.ndarray:
    return score_from_paths(mean_path_lengths(forest, table), forest.subsample_size)


def anomaly_score(forest: Forest, row) -> float:
    _check_forest(forest)
    x = np.asarray(row, dtype=float).reshape(1, -1)
    return float(score_rows(forest, x)[0])


def score_table(forest: Forest, table) -> list[tuple[int, float]]:
    _check_forest(forest)
    X = _as_matrix(table)
    if X.shape[0] == 0:
        return []
    return list(enumerate(score_rows(forest, X).tolist()))


# -- serialization ----------------------------------------------------------


def forest_to_dict(forest: Forest) -> dict:
    cfg = asdict(forest.config)
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": forest.kind,
        "config": cfg,
        "n_features": forest.n_features,
        "subsample_size": forest.subsample_size,
        "group_keys": list(forest.group_keys),
        "extra": forest.extra,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": [None if math.isnan(v) else v for v in t.threshold.tolist()],
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "size": t.size.tolist(),
                "depth": t.depth.tolist(),
                "adjust": t.adjust.tolist(),
                "group_pure": (t.group >= 0).tolist(),
                "group": t.group.tolist(),
            }
            for t in forest.trees
        ],
    }


def forest_from_dict(doc: dict) -> Forest:
    if doc.get("format") != FORMAT_NAME:
        raise SchemaError("not a scanforest forest document")
    if doc.get("version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported forest format version {doc.get('version')}")
    trees = tuple(
        Tree(
            np.array(t["feature"], dtype=np.int64),
            np.array([np.nan if v is None else v for v in t["threshold"]], dtype=float),
            np.array(t["left"], dtype=np.int64),
            np.array(t["right"], dtype=np.int64),
            np.array(t["size"], dtype=np.int64),
            np.array(t["depth"], dtype=np.int64),
            np.array(t["adjust"], dtype=float),
            np.array(t["group"], dtype=np.int64),
        )
        for t in doc["trees"]
    )
    if doc["kind"] == "siforest":
        from scanforest.siforest import SiForestConfig

        cfg = SiForestConfig(**doc["config"])
    else:
        cfg = ForestConfig(**doc["config"])
    return Forest(
        trees,
        cfg,
        doc["n_features"],
        doc["subsample_size"],
        tuple(doc["group_keys"]),
        doc["kind"],
        doc.get("extra", {}),
    )


def save_forest(forest: Forest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(forest_to_dict(forest)), encoding="utf-8")


def load_forest(path: str | Path) -> Forest:
    return forest_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
