"""Counterfactual feature interventions and cluster-transition reports.

Interventions edit feature vectors, not raw telemetry: set a feature,
scale it, or shift one SKU's vertex fraction onto another. Shifting moves
fraction mass only; the destination SKU's utilization features keep their
observed values (the machine environment is what it is), so compounding
effects of re-balancing are deliberately not modeled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .clustering import ShapeModel
from .errors import EmptyJobSet, InvalidFraction, UnknownFeature
from .features import ExampleSet, FeatureSchema, FeatureVector
from .forest import Forest, predict_proba

SKU_FRAC_PREFIX = "sku_frac."
CPU_STD_PREFIX = "cpu_util_std."


@dataclass(frozen=True)
class SetFeature:
    name: str
    value: float

    def to_dict(self) -> dict:
        return {"op": "set", "feature": self.name, "value": self.value}


@dataclass(frozen=True)
class ScaleFeature:
    name: str
    factor: float

    def to_dict(self) -> dict:
        return {"op": "scale", "feature": self.name, "factor": self.factor}


@dataclass(frozen=True)
class ShiftSkuFraction:
    from_sku: str
    to_sku: str

    def to_dict(self) -> dict:
        return {"op": "shift_sku", "from_sku": self.from_sku, "to_sku": self.to_sku}


Op = SetFeature | ScaleFeature | ShiftSkuFraction


@dataclass(frozen=True)
class Intervention:
    ops: tuple[Op, ...] = ()

    def to_dict(self) -> dict:
        return {"ops": [op.to_dict() for op in self.ops]}

    def to_json(self) -> str:
        """Canonical serialization: sorted keys, compact separators."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_dict(obj: dict) -> "Intervention":
        ops: list[Op] = []
        for entry in obj.get("ops", []):
            kind = entry.get("op")
            if kind == "set":
                ops.append(SetFeature(str(entry["feature"]), float(entry["value"])))
            elif kind == "scale":
                ops.append(ScaleFeature(str(entry["feature"]), float(entry["factor"])))
            elif kind == "shift_sku":
                ops.append(ShiftSkuFraction(str(entry["from_sku"]), str(entry["to_sku"])))
            else:
                raise UnknownFeature(f"unknown intervention op {kind!r}")
        return Intervention(tuple(ops))


def _idx(schema: FeatureSchema, name: str) -> int:
    try:
        return schema.index(name)
    except KeyError:
        raise UnknownFeature(name) from None


def _apply_to_row(values: np.ndarray, schema: FeatureSchema, intervention: Intervention) -> None:
    for op in intervention.ops:
        if isinstance(op, SetFeature):
            values[_idx(schema, op.name)] = op.value
        elif isinstance(op, ScaleFeature):
            values[_idx(schema, op.name)] *= op.factor
        elif isinstance(op, ShiftSkuFraction):
            src = _idx(schema, SKU_FRAC_PREFIX + op.from_sku)
            dst = _idx(schema, SKU_FRAC_PREFIX + op.to_sku)
            values[dst] += values[src]
            values[src] = 0.0
        else:  # pragma: no cover
            raise UnknownFeature(f"unsupported op {op!r}")


def _check_fractions(values: np.ndarray, schema: FeatureSchema) -> None:
    idx = [i for i, n in enumerate(schema.names) if n.startswith(SKU_FRAC_PREFIX)]
    if not idx:
        return
    fracs = values[idx]
    if (fracs < -1e-9).any() or (fracs > 1.0 + 1e-9).any():
        raise InvalidFraction(f"fractions outside [0, 1]: {fracs}")
    total = float(fracs.sum())
    if total > 1e-9 and abs(total - 1.0) > 1e-6:
        raise InvalidFraction(f"fractions sum to {total}")


def apply_intervention(fv: FeatureVector, intervention: Intervention) -> FeatureVector:
    """Apply ops in order, returning a new vector; the input is untouched."""
    values = fv.values.copy()
    _apply_to_row(values, fv.schema, intervention)
    _check_fractions(values, fv.schema)
    return FeatureVector(
        values=values,
        schema=fv.schema,
        label=fv.label,
        group_key=fv.group_key,
        instance_id=fv.instance_id,
        submit_time=fv.submit_time,
    )


def apply_to_matrix(x: np.ndarray, schema: FeatureSchema, intervention: Intervention) -> np.ndarray:
    out = np.array(x, dtype=np.float64, copy=True)
    for row in out:
        _apply_to_row(row, schema, intervention)
        _check_fractions(row, schema)
    return out


@dataclass(frozen=True)
class TransitionStat:
    from_cluster: int
    to_cluster: int
    n_jobs: int
    pct_of_from: float
    stat_before: dict
    stat_after: dict

    def to_dict(self) -> dict:
        return {
            "from_cluster": self.from_cluster,
            "to_cluster": self.to_cluster,
            "n_jobs": self.n_jobs,
            "pct_of_from": self.pct_of_from,
            "stat_before": self.stat_before,
            "stat_after": self.stat_after,
        }


@dataclass(eq=False)
class ScenarioReport:
    transition: np.ndarray  # (K, K) counts, before -> after
    pct_changed: float
    top_transitions: list[TransitionStat]
    n_jobs: int
    before_clusters: np.ndarray = field(repr=False, default=None)
    after_clusters: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "transition": [[int(v) for v in row] for row in self.transition],
            "pct_changed": float(self.pct_changed),
            "n_jobs": int(self.n_jobs),
            "top_transitions": [t.to_dict() for t in self.top_transitions],
        }

    def to_text(self) -> str:
        k = self.transition.shape[0]
        lines = [f"jobs: {self.n_jobs}   changed: {100 * self.pct_changed:.2f}%"]
        header = "before\\after " + " ".join(f"{j:>7}" for j in range(k))
        lines.append(header)
        for i in range(k):
            lines.append(f"{i:>12} " + " ".join(f"{int(v):>7}" for v in self.transition[i]))
        for t in self.top_transitions:
            b, a = t.stat_before, t.stat_after
            lines.append(
                f"cluster {t.from_cluster} -> {t.to_cluster}: {t.n_jobs} jobs "
                f"({100 * t.pct_of_from:.1f}% of cluster {t.from_cluster}); "
                f"outlier {100 * b['outlier_pct']:.2f}% -> {100 * a['outlier_pct']:.2f}%, "
                f"IQR {b['iqr_25_75']:.3g} -> {a['iqr_25_75']:.3g}, "
                f"p95 {b['p95']:.3g} -> {a['p95']:.3g}, "
                f"std {b['std']:.3g} -> {a['std']:.3g}"
            )
        return "\n".join(lines)


def run_scenario(
    test: ExampleSet,
    classifier: Forest,
    shape_model: ShapeModel,
    intervention: Intervention,
    top_n: int = 3,
) -> ScenarioReport:
    """Predict each job before and after the intervention and aggregate."""
    if len(test) == 0:
        raise EmptyJobSet("scenario over zero jobs")
    k = shape_model.k
    before = predict_proba(classifier, test.X).argmax(axis=1)
    x_after = apply_to_matrix(test.X, test.schema, intervention)
    after = predict_proba(classifier, x_after).argmax(axis=1)
    transition = np.zeros((k, k), dtype=np.int64)
    np.add.at(transition, (before, after), 1)
    n = len(test)
    changed = int(transition.sum() - np.trace(transition))
    row_counts = transition.sum(axis=1)
    off_diag = [
        (int(transition[i, j]), i, j)
        for i in range(k)
        for j in range(k)
        if i != j and transition[i, j] > 0
    ]
    off_diag.sort(key=lambda t: (-t[0], t[1], t[2]))
    top = [
        TransitionStat(
            from_cluster=i,
            to_cluster=j,
            n_jobs=cnt,
            pct_of_from=cnt / row_counts[i],
            stat_before=dict(shape_model.stats[i]),
            stat_after=dict(shape_model.stats[j]),
        )
        for cnt, i, j in off_diag[:top_n]
    ]
    return ScenarioReport(
        transition=transition,
        pct_changed=changed / n,
        top_transitions=top,
        n_jobs=n,
        before_clusters=before,
        after_clusters=after,
    )


def builtin_scenarios(
    schema: FeatureSchema, sku_from: str = "Gen3.5", sku_to: str = "Gen5.2"
) -> dict[str, Intervention]:
    """The three named scenarios: spare tokens off, SKU upgrade, load balance.

    Zero values are integer literals so the canonical JSON is byte-identical
    between the Python and TypeScript serializers.
    """
    load_balance_ops = tuple(
        SetFeature(name, 0) for name in schema.names if name.startswith(CPU_STD_PREFIX)
    )
    return {
        "spare-tokens-off": Intervention((SetFeature("spare_token_avg", 0),)),
        "sku-upgrade": Intervention((ShiftSkuFraction(sku_from, sku_to),)),
        "load-balance": Intervention(load_balance_ops),
    }
