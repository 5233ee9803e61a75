"""Shapley-value attributions for cluster-membership predictions.

Interventional (permutation-sampling) Shapley with an explicit background
set: the value of a coalition is the model's predicted probability of the
target class with coalition features taken from the instance and the rest
from a background reference, averaged over references. The sampled
estimator walks random feature orders; the exact one enumerates all 2^d
coalitions and is the oracle the sampled path is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaMismatch, TooManyFeatures
from .features import FeatureVector
from .forest import Forest, predict_proba

DEFAULT_PERMUTATIONS = 128
DEFAULT_BACKGROUND = 64
EXACT_FEATURE_CAP = 12


@dataclass(eq=False)
class ShapleyReport:
    instance_id: str | None
    target_class: int
    values: np.ndarray  # signed, probability units, aligned to feature order
    baseline: float  # expected model output over the background set
    fx: float  # model output at the instance
    feature_names: tuple[str, ...]

    @property
    def efficiency_gap(self) -> float:
        return float(abs(self.values.sum() - (self.fx - self.baseline)))

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "target_class": int(self.target_class),
            "baseline": float(self.baseline),
            "fx": float(self.fx),
            "values": {n: float(v) for n, v in zip(self.feature_names, self.values)},
        }


def _as_model_fn(model, target_class: int):
    """Accept a Forest or a callable mapping (n, d) matrices to scores."""
    if callable(model) and not isinstance(model, Forest):
        return model
    return lambda x: predict_proba(model, x)[:, target_class]


def _prepare(model, fv, background):
    if isinstance(fv, FeatureVector):
        x = fv.values
        names = fv.schema.names
        instance_id = fv.instance_id
        if (
            isinstance(model, Forest)
            and model.schema_fingerprint
            and fv.schema.fingerprint() != model.schema_fingerprint
        ):
            raise SchemaMismatch("feature vector schema differs from the model's")
    else:
        x = np.asarray(fv, dtype=np.float64)
        names = tuple(f"f{i}" for i in range(x.size))
        instance_id = None
    bg = np.asarray(
        [b.values if isinstance(b, FeatureVector) else b for b in background],
        dtype=np.float64,
    )
    if bg.ndim != 2 or bg.shape[1] != x.size:
        raise SchemaMismatch("background width does not match the instance")
    return x, names, instance_id, bg


def shapley_sampled(
    model,
    fv,
    target_class: int,
    background,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> ShapleyReport:
    """Permutation-sampling Shapley estimate.

    For every sampled feature order and every background reference, inserts
    the instance's features one at a time and accumulates the marginal
    change in the target-class probability. The telescoping sum makes the
    efficiency axiom hold to float precision even at one permutation.
    """
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    x, names, instance_id, bg = _prepare(model, fv, background)
    if len(bg) == 0:
        raise ValueError("background must be non-empty")
    f = _as_model_fn(model, target_class)
    d = x.size
    n_bg = bg.shape[0]
    rng = np.random.default_rng(seed)
    values = np.zeros(d)
    steps = np.empty((d + 1, n_bg, d))
    for _ in range(n_permutations):
        perm = rng.permutation(d)
        z = bg.copy()
        steps[0] = z
        for t, j in enumerate(perm):
            z[:, j] = x[j]
            steps[t + 1] = z
        out = np.asarray(f(steps.reshape(-1, d)), dtype=np.float64).reshape(d + 1, n_bg)
        values[perm] += (out[1:] - out[:-1]).sum(axis=1)
    values /= n_permutations * n_bg
    fx = float(np.asarray(f(x[None, :]))[0])
    baseline = float(np.asarray(f(bg)).mean())
    return ShapleyReport(instance_id, target_class, values, baseline, fx, names)


def exact_shapley(model, fv, target_class: int, background) -> ShapleyReport:
    """Exact Shapley values by full coalition enumeration (d <= 12)."""
    x, names, instance_id, bg = _prepare(model, fv, background)
    if len(bg) == 0:
        raise ValueError("background must be non-empty")
    d = x.size
    if d > EXACT_FEATURE_CAP:
        raise TooManyFeatures(f"{d} features; exact enumeration caps at {EXACT_FEATURE_CAP}")
    f = _as_model_fn(model, target_class)
    n_bg = bg.shape[0]
    n_masks = 1 << d
    composites = np.repeat(bg[None, :, :], n_masks, axis=0)  # (masks, n_bg, d)
    for j in range(d):
        sel = (np.arange(n_masks) >> j) & 1 == 1
        composites[sel, :, j] = x[j]
    v = np.asarray(f(composites.reshape(-1, d)), dtype=np.float64).reshape(n_masks, n_bg)
    v = v.mean(axis=1)  # value of each coalition

    fact = [math.factorial(i) for i in range(d + 1)]
    weights = [fact[s] * fact[d - 1 - s] / fact[d] for s in range(d)]
    sizes = np.array([bin(m).count("1") for m in range(n_masks)])
    values = np.zeros(d)
    for j in range(d):
        without = np.nonzero((np.arange(n_masks) >> j) & 1 == 0)[0]
        w = np.array([weights[s] for s in sizes[without]])
        values[j] = float((w * (v[without | (1 << j)] - v[without])).sum())
    return ShapleyReport(
        instance_id, target_class, values, float(v[0]), float(v[n_masks - 1]), names
    )


def shap_summary(
    model,
    instances,
    feature: str,
    target_class: int,
    background=None,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> list[tuple[float, float]]:
    """(feature value, Shapley value) pair per instance, for scatter export.

    When no background is given, up to DEFAULT_BACKGROUND of the instances
    themselves serve as references (seed-fixed subsample).
    """
    instances = list(instances)
    if not instances:
        raise ValueError("need at least one instance")
    mats = np.asarray([fv.values for fv in instances], dtype=np.float64)
    if background is None:
        rng = np.random.default_rng(seed)
        take = min(DEFAULT_BACKGROUND, len(mats))
        background = mats[rng.choice(len(mats), size=take, replace=False)]
    idx = instances[0].schema.index(feature)
    pairs = []
    for i, fv in enumerate(instances):
        report = shapley_sampled(
            model, fv, target_class, background,
            n_permutations=n_permutations, seed=seed + i,
        )
        pairs.append((float(fv.values[idx]), float(report.values[idx])))
    return pairs


def summary_to_csv(pairs, feature: str, target_class: int, fh, instance_ids=None) -> None:
    fh.write("instance_id,feature,feature_value,shapley_value,class\n")
    ids = instance_ids if instance_ids is not None else [""] * len(pairs)
    for iid, (fval, sval) in zip(ids, pairs):
        fh.write(f"{iid},{feature},{fval!r},{sval!r},{target_class}\n")
