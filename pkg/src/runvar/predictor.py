"""Cluster-membership classifier, regression baseline, and evaluation.

The classifier is a bagged random forest over compile-time features; the
baseline is a random-forest regressor predicting raw runtime. Evaluation
compares both as distribution predictors: the classification approach
maps each test job's predicted cluster centroid back to runtime units via
the job's historic median, the regression approach uses the empirical
distribution of its point predictions, and both are scored against the
actual test runtimes with QQ mean absolute error and the
Kolmogorov-Smirnov distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ShapeModel
from .distribution import NormalizationMode
from .errors import EmptyTest, SchemaMismatch
from .features import ExampleSet, FeatureSchema, FeatureVector
from .forest import (
    Forest,
    ForestParams,
    TASK_CLASSIFY,
    TASK_REGRESS,
    feature_importance,
    predict_proba,
    predict_value,
    train_forest,
)

OCCURRENCE_BUCKETS = (
    ("1-5", 0, 5),
    ("6-10", 6, 10),
    ("11-15", 11, 15),
    ("16-50", 16, 50),
    ("51+", 51, None),
)


def train_classifier(train: ExampleSet, params: ForestParams | None = None) -> Forest:
    """Bagged Gini forest predicting cluster membership from features."""
    if params is None:
        params = ForestParams()
    if train.y is None:
        raise ValueError("training set has no labels")
    return train_forest(
        train.X,
        train.y,
        TASK_CLASSIFY,
        params,
        train.schema.names,
        schema_fingerprint=train.schema.fingerprint(),
    )


def train_regression_baseline(train: ExampleSet, params: ForestParams | None = None) -> Forest:
    """Variance-reduction forest predicting raw runtime (the point-estimate baseline)."""
    if params is None:
        params = ForestParams()
    return train_forest(
        train.X,
        train.runtimes,
        TASK_REGRESS,
        params,
        train.schema.names,
        schema_fingerprint=train.schema.fingerprint(),
    )


def predict_cluster(model: Forest, fv: FeatureVector) -> tuple[np.ndarray, int]:
    """Probability vector over clusters plus argmax (lowest id on ties)."""
    if model.schema_fingerprint and fv.schema.fingerprint() != model.schema_fingerprint:
        raise SchemaMismatch("feature vector schema differs from the model's")
    proba = predict_proba(model, fv.values[None, :])[0]
    return proba, int(np.argmax(proba))


def gini_importance(model: Forest) -> dict[str, float]:
    """Per-feature impurity-decrease totals, normalized to sum 1."""
    scores = feature_importance(model)
    return {name: float(s) for name, s in zip(model.feature_names, scores)}


def select_features(
    train: ExampleSet,
    threshold: float,
    params: ForestParams | None = None,
    corr_limit: float = 0.95,
) -> FeatureSchema:
    """Importance-threshold feature selection with correlated-pair pruning.

    Fits a preliminary forest, then (1) among feature pairs with absolute
    Pearson correlation above `corr_limit` drops the lower-importance one,
    and (2) drops features with importance strictly below `threshold`.
    """
    if params is None:
        params = ForestParams(n_trees=20, max_depth=10)
    model = train_classifier(train, params)
    importance = feature_importance(model)
    x = train.X
    d = x.shape[1]
    std = x.std(axis=0)
    centered = x - x.mean(axis=0)
    dropped = np.zeros(d, dtype=bool)
    # keep the higher-importance member of each highly correlated pair;
    # scan in descending importance so survivors are decided first
    order = sorted(range(d), key=lambda i: (-importance[i], i))
    for pos, i in enumerate(order):
        if dropped[i]:
            continue
        for j in order[pos + 1:]:
            if dropped[j]:
                continue
            if std[i] == 0 and std[j] == 0:
                corr = 1.0 if np.array_equal(x[:, i], x[:, j]) else 0.0
            elif std[i] == 0 or std[j] == 0:
                corr = 0.0
            else:
                corr = float((centered[:, i] @ centered[:, j]) / (len(x) * std[i] * std[j]))
            if abs(corr) > corr_limit:
                dropped[j] = True
    keep = [
        train.schema.names[i]
        for i in range(d)
        if not dropped[i] and importance[i] >= threshold
    ]
    return train.schema.subset(keep)


@dataclass(eq=False)
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # (K, K) row-normalized; zero rows stay zero
    confusion_counts: np.ndarray  # (K, K) ints, rows = actual label
    accuracy_by_occurrence: dict[str, tuple[int, float]]
    gini_importance: dict[str, float]
    qq_mae: dict[str, float]
    ks_distance: dict[str, float]
    n_test: int

    def to_dict(self) -> dict:
        return {
            "accuracy": float(self.accuracy),
            "confusion": [[float(v) for v in row] for row in self.confusion],
            "confusion_counts": [[int(v) for v in row] for row in self.confusion_counts],
            "accuracy_by_occurrence": {
                k: {"count": int(c), "accuracy": float(a)}
                for k, (c, a) in self.accuracy_by_occurrence.items()
            },
            "gini_importance": {k: float(v) for k, v in self.gini_importance.items()},
            "qq_mae": {k: float(v) for k, v in self.qq_mae.items()},
            "ks_distance": {k: float(v) for k, v in self.ks_distance.items()},
            "n_test": int(self.n_test),
        }

    def to_text(self) -> str:
        lines = [f"accuracy: {self.accuracy:.4f}  (n_test={self.n_test})"]
        lines.append("accuracy by occurrences:")
        for bucket, (count, acc) in self.accuracy_by_occurrence.items():
            shown = f"{acc:.4f}" if count else "-"
            lines.append(f"  {bucket:>6}: n={count:<6} acc={shown}")
        lines.append(
            "QQ MAE: classification={c:.4g} regression={r:.4g}".format(
                c=self.qq_mae["classification"], r=self.qq_mae["regression"]
            )
        )
        lines.append(
            "KS distance: classification={c:.4g} regression={r:.4g}".format(
                c=self.ks_distance["classification"], r=self.ks_distance["regression"]
            )
        )
        top = sorted(self.gini_importance.items(), key=lambda kv: -kv[1])[:10]
        lines.append("top features by Gini importance:")
        for name, score in top:
            lines.append(f"  {name:<32} {score:.4f}")
        return "\n".join(lines)


def weighted_quantiles(values: np.ndarray, weights: np.ndarray, qs) -> np.ndarray:
    """Quantiles of a weighted sample by linear interpolation on the CDF."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = weights[order]
    cw = np.cumsum(w)
    total = cw[-1]
    # midpoint convention keeps results exact for equal weights
    grid = (cw - 0.5 * w) / total
    return np.interp(qs, grid, v)


def ks_distance_weighted(
    sample: np.ndarray, atom_values: np.ndarray, atom_weights: np.ndarray
) -> float:
    """Sup gap between an empirical CDF and a weighted-atom CDF."""
    sample = np.sort(np.asarray(sample, dtype=np.float64))
    order = np.argsort(atom_values, kind="stable")
    av = atom_values[order]
    aw = np.cumsum(atom_weights[order])
    aw /= aw[-1]
    points = np.unique(np.concatenate([sample, av]))
    f_sample = np.searchsorted(sample, points, side="right") / sample.size
    idx = np.searchsorted(av, points, side="right")
    f_atoms = np.where(idx > 0, aw[np.minimum(idx, len(av)) - 1], 0.0)
    f_atoms[idx == 0] = 0.0
    return float(np.abs(f_sample - f_atoms).max())


def predicted_runtime_atoms(
    shape_model: ShapeModel, pred_clusters: np.ndarray, medians: np.ndarray
):
    """Runtime-unit atoms of the classification approach's predicted mixture.

    Each test job contributes its predicted cluster's centroid PMF mapped
    through its historic median (ratio: value * median, delta: value +
    median); outlier bins sit at the threshold boundary.
    """
    reps = shape_model.spec.representative_values()
    if shape_model.spec.mode is NormalizationMode.RATIO:
        values = medians[:, None] * reps[None, :]
    else:
        values = medians[:, None] + reps[None, :]
    weights = shape_model.centroids[pred_clusters] / len(pred_clusters)
    return values.ravel(), weights.ravel()


def evaluate(
    classifier: Forest,
    regression: Forest | None,
    shape_model: ShapeModel,
    test: ExampleSet,
) -> EvalReport:
    """Full evaluation against posterior-likelihood labels."""
    if len(test) == 0:
        raise EmptyTest("empty test set")
    if test.y is None:
        raise EmptyTest("test set has no labels")
    k = shape_model.k
    proba = predict_proba(classifier, test.X)
    pred = proba.argmax(axis=1)
    actual = test.y
    accuracy = float((pred == actual).mean())

    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (actual, pred), 1)
    confusion = counts.astype(np.float64)
    row_sums = confusion.sum(axis=1, keepdims=True)
    np.divide(confusion, row_sums, out=confusion, where=row_sums > 0)

    n_prior = test.X[:, test.schema.index("n_prior_occurrences")]
    by_occ = {}
    for label, lo, hi in OCCURRENCE_BUCKETS:
        mask = n_prior >= lo if hi is None else (n_prior >= lo) & (n_prior <= hi)
        n = int(mask.sum())
        by_occ[label] = (n, float((pred[mask] == actual[mask]).mean()) if n else 0.0)

    qq = {}
    ks = {}
    percentiles = np.arange(1, 100) / 100.0
    actual_runtimes = test.runtimes
    q_actual = np.quantile(actual_runtimes, percentiles)

    atom_v, atom_w = predicted_runtime_atoms(shape_model, pred, test.hist_medians)
    q_class = weighted_quantiles(atom_v, atom_w, percentiles)
    qq["classification"] = float(np.abs(q_class - q_actual).mean())
    ks["classification"] = ks_distance_weighted(actual_runtimes, atom_v, atom_w)

    if regression is not None:
        point = predict_value(regression, test.X)
        q_reg = np.quantile(point, percentiles)
        qq["regression"] = float(np.abs(q_reg - q_actual).mean())
        ks["regression"] = ks_distance_weighted(
            actual_runtimes, point, np.full(point.shape, 1.0 / point.size)
        )
    else:
        qq["regression"] = float("nan")
        ks["regression"] = float("nan")

    return EvalReport(
        accuracy=accuracy,
        confusion=confusion,
        confusion_counts=counts,
        accuracy_by_occurrence=by_occ,
        gini_importance=gini_importance(classifier),
        qq_mae=qq,
        ks_distance=ks,
        n_test=len(test),
    )
