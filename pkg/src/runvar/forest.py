"""Bagged decision-tree ensembles, hand-rolled for determinism.

Trees are flat parallel arrays (feature, threshold, left, right, value,
n_samples, impurity) so they serialize to JSON directly and traverse
through the kernel backends. Classification trees split on Gini impurity,
regression trees on variance reduction. Every tree gets its own RNG
stream derived from (seed, tree index); training is bit-reproducible for
a fixed (data, hyperparams, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateLabels, SchemaMismatch

TASK_CLASSIFY = "classify"
TASK_REGRESS = "regress"


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    max_depth: int = 12
    min_leaf: int = 1
    feature_subsample: str | float = "sqrt"
    seed: int = 0

    def resolve_subsample(self, n_features: int) -> int:
        fs = self.feature_subsample
        if fs == "sqrt":
            return max(1, int(round(n_features ** 0.5)))
        if fs == "all":
            return n_features
        if isinstance(fs, (int, float)) and not isinstance(fs, bool):
            if 0 < fs <= 1 and isinstance(fs, float):
                return max(1, int(round(fs * n_features)))
            return max(1, min(int(fs), n_features))
        raise ValueError(f"bad feature_subsample {fs!r}")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "feature_subsample": self.feature_subsample,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(obj: dict) -> "ForestParams":
        return ForestParams(
            n_trees=int(obj["n_trees"]),
            max_depth=int(obj["max_depth"]),
            min_leaf=int(obj["min_leaf"]),
            feature_subsample=obj["feature_subsample"],
            seed=int(obj["seed"]),
        )


@dataclass(eq=False)
class Tree:
    feature: np.ndarray  # int64; valid only at internal nodes
    threshold: np.ndarray  # float64
    left: np.ndarray  # int64; -1 marks a leaf
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_out): class distribution or scalar mean
    n_samples: np.ndarray  # int64 bootstrap count per node
    impurity: np.ndarray  # float64 gini or mse per node

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "impurity": self.impurity.tolist(),
        }

    @staticmethod
    def from_dict(obj: dict) -> "Tree":
        return Tree(
            feature=np.asarray(obj["feature"], dtype=np.int64),
            threshold=np.asarray(obj["threshold"], dtype=np.float64),
            left=np.asarray(obj["left"], dtype=np.int64),
            right=np.asarray(obj["right"], dtype=np.int64),
            value=np.asarray(obj["value"], dtype=np.float64),
            n_samples=np.asarray(obj["n_samples"], dtype=np.int64),
            impurity=np.asarray(obj["impurity"], dtype=np.float64),
        )


@dataclass(eq=False)
class Forest:
    task: str
    n_classes: int  # 1 for regression
    trees: list[Tree]
    params: ForestParams
    feature_names: tuple[str, ...]
    schema_fingerprint: str

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "n_classes": self.n_classes,
            "params": self.params.to_dict(),
            "feature_names": list(self.feature_names),
            "schema_fingerprint": self.schema_fingerprint,
            "trees": [t.to_dict() for t in self.trees],
        }

    @staticmethod
    def from_dict(obj: dict) -> "Forest":
        return Forest(
            task=obj["task"],
            n_classes=int(obj["n_classes"]),
            trees=[Tree.from_dict(t) for t in obj["trees"]],
            params=ForestParams.from_dict(obj["params"]),
            feature_names=tuple(obj["feature_names"]),
            schema_fingerprint=obj["schema_fingerprint"],
        )


class _TreeBuilder:
    def __init__(self, x, y, n_classes, task, params, m_features, rng):
        self.x = x
        self.y = y
        self.n_classes = n_classes
        self.task = task
        self.params = params
        self.m = m_features
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []
        self.n_samples: list[int] = []
        self.impurity: list[float] = []

    def _node_stats(self, idx):
        if self.task == TASK_CLASSIFY:
            counts = np.bincount(self.y[idx], minlength=self.n_classes).astype(np.float64)
            probs = counts / len(idx)
            gini = 1.0 - float((probs * probs).sum())
            return probs, gini
        vals = self.y[idx]
        mean = float(vals.mean())
        mse = float(((vals - mean) ** 2).mean())
        return np.array([mean]), mse

    def _add_node(self, idx):
        value, imp = self._node_stats(idx)
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.n_samples.append(len(idx))
        self.impurity.append(imp)
        return node, imp

    def build(self, idx, depth=0):
        node, imp = self._add_node(idx)
        params = self.params
        if (
            depth >= params.max_depth
            or len(idx) < 2 * params.min_leaf
            or imp <= 1e-12
        ):
            return node
        n_feat = self.x.shape[1]
        feat_ids = self.rng.choice(n_feat, size=self.m, replace=False).astype(np.int64)
        if self.task == TASK_CLASSIFY:
            f, thr, _ = _kernels.best_split_gini(
                self.x, idx, self.y, self.n_classes, feat_ids, params.min_leaf
            )
        else:
            f, thr, _ = _kernels.best_split_mse(self.x, idx, self.y, feat_ids, params.min_leaf)
        if f < 0:
            return node
        mask = self.x[idx, f] <= thr
        left_idx = idx[mask]
        right_idx = idx[~mask]
        if len(left_idx) == 0 or len(right_idx) == 0:
            return node
        self.feature[node] = int(f)
        self.threshold[node] = float(thr)
        self.left[node] = self.build(left_idx, depth + 1)
        self.right[node] = self.build(right_idx, depth + 1)
        return node

    def freeze(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
            n_samples=np.asarray(self.n_samples, dtype=np.int64),
            impurity=np.asarray(self.impurity, dtype=np.float64),
        )


def train_forest(
    x: np.ndarray,
    y: np.ndarray,
    task: str,
    params: ForestParams,
    feature_names,
    schema_fingerprint: str = "",
) -> Forest:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if np.isnan(x).any():
        raise ValueError("training matrix contains NaN")
    n = x.shape[0]
    if task == TASK_CLASSIFY:
        y = np.ascontiguousarray(y, dtype=np.int64)
        n_classes = int(y.max()) + 1 if len(y) else 0
        if len(np.unique(y)) < 2:
            raise DegenerateLabels("need at least two classes to train")
    else:
        y = np.ascontiguousarray(y, dtype=np.float64)
        n_classes = 1
    m = params.resolve_subsample(x.shape[1])
    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng([params.seed & 0xFFFFFFFFFFFFFFFF, t])
        bootstrap = rng.integers(0, n, n).astype(np.int64)
        bootstrap.sort()
        builder = _TreeBuilder(x, y, n_classes, task, params, m, rng)
        builder.build(bootstrap)
        trees.append(builder.freeze())
    return Forest(
        task=task,
        n_classes=n_classes,
        trees=trees,
        params=params,
        feature_names=tuple(feature_names),
        schema_fingerprint=schema_fingerprint,
    )


def _check_matrix(forest: Forest, x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != forest.n_features:
        raise SchemaMismatch(
            f"matrix has {x.shape[1]} features, model expects {forest.n_features}"
        )
    return x


def predict_proba(forest: Forest, x: np.ndarray) -> np.ndarray:
    """Mean of the per-tree leaf class distributions, shape (n, K)."""
    x = _check_matrix(forest, x)
    acc = np.zeros((x.shape[0], forest.n_classes))
    for tree in forest.trees:
        leaves = _kernels.tree_apply(x, tree.feature, tree.threshold, tree.left, tree.right)
        acc += tree.value[leaves]
    acc /= len(forest.trees)
    return acc


def predict_value(forest: Forest, x: np.ndarray) -> np.ndarray:
    """Mean of the per-tree leaf means, shape (n,)."""
    x = _check_matrix(forest, x)
    acc = np.zeros(x.shape[0])
    for tree in forest.trees:
        leaves = _kernels.tree_apply(x, tree.feature, tree.threshold, tree.left, tree.right)
        acc += tree.value[leaves, 0]
    return acc / len(forest.trees)


def feature_importance(forest: Forest) -> np.ndarray:
    """Total impurity decrease per feature, normalized to sum 1.

    A feature never used in any split scores exactly 0.
    """
    scores = np.zeros(forest.n_features)
    for tree in forest.trees:
        root_n = tree.n_samples[0]
        internal = np.nonzero(tree.left >= 0)[0]
        for node in internal:
            l, r = tree.left[node], tree.right[node]
            n, nl, nr = tree.n_samples[node], tree.n_samples[l], tree.n_samples[r]
            decrease = tree.impurity[node] - (
                nl / n * tree.impurity[l] + nr / n * tree.impurity[r]
            )
            scores[tree.feature[node]] += (n / root_n) * decrease
    total = scores.sum()
    if total > 0:
        scores /= total
    return scores


def features_used(forest: Forest) -> set[int]:
    used: set[int] = set()
    for tree in forest.trees:
        used.update(int(f) for f in tree.feature[tree.left >= 0])
    return used
