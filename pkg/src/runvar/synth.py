"""Synthetic workload generator with planted distribution shapes.

Each group is assigned one of k_true shape families; its runtimes are
median * M with M drawn from a lognormal mixture (main mode at 1, an
optional second mode, and an outlier spike). Compile-time features are
shape-dependent prototypes perturbed by Gaussian noise, which creates a
controllable ceiling for the downstream classifier.

Per-group RNG streams are derived from (seed, group index), so generation
is reproducible and order-independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import ConfigError
from .telemetry import (
    DagNode,
    Dataset,
    GroupKey,
    JobGroup,
    JobInstance,
    OperatorDag,
    normalize_job_name,
    plan_signature,
)

SKUS = ("Gen3.5", "Gen4", "Gen5.2", "Gen6")
OPERATORS = ("Aggregate", "Extract", "Filter", "Join", "Window")

_U64 = 0xFFFFFFFFFFFFFFFF
_SCALE_KEYS = (
    "vertex_count",
    "cardinality_est",
    "input_bytes",
    "temp_read_bytes",
    "token_alloc",
    "token_avg",
    "spare_token_avg",
)


@dataclass(frozen=True)
class ShapeParams:
    """One planted shape family for normalized runtime ratios."""

    median_range: tuple[float, float]
    second_mode_offset: float = 1.0
    second_mode_weight: float = 0.0
    spread: float = 0.1
    outlier_prob: float = 0.0
    outlier_scale: float = 12.0

    def validate(self) -> None:
        lo, hi = self.median_range
        if not 0 < lo <= hi:
            raise ConfigError(f"median_range {self.median_range} must be positive and ordered")
        if not 0.0 <= self.second_mode_weight <= 1.0:
            raise ConfigError("second_mode_weight must be in [0, 1]")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ConfigError("outlier_prob must be in [0, 1]")
        if self.spread < 0 or self.second_mode_offset <= 0 or self.outlier_scale <= 0:
            raise ConfigError("spread/offsets must be positive")

    def to_dict(self) -> dict:
        return {
            "median_range": list(self.median_range),
            "second_mode_offset": self.second_mode_offset,
            "second_mode_weight": self.second_mode_weight,
            "spread": self.spread,
            "outlier_prob": self.outlier_prob,
            "outlier_scale": self.outlier_scale,
        }

    @staticmethod
    def from_dict(obj: dict) -> "ShapeParams":
        return ShapeParams(
            median_range=tuple(obj["median_range"]),
            second_mode_offset=float(obj.get("second_mode_offset", 1.0)),
            second_mode_weight=float(obj.get("second_mode_weight", 0.0)),
            spread=float(obj.get("spread", 0.1)),
            outlier_prob=float(obj.get("outlier_prob", 0.0)),
            outlier_scale=float(obj.get("outlier_scale", 12.0)),
        )


@dataclass(frozen=True)
class SynthConfig:
    n_groups: int
    instances_per_group: tuple[int, int]
    k_true: int
    shape_params: tuple[ShapeParams, ...]
    feature_noise: float = 0.05
    seed: int = 0
    start: datetime = datetime(2021, 6, 1, tzinfo=timezone.utc)
    span_days: float = 90.0
    group_jitter: float = 0.15
    # optional per-shape overrides of the procedural feature prototypes
    feature_prototypes: tuple[dict, ...] | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.k_true < 2:
            raise ConfigError("k_true must be >= 2")
        if self.n_groups < 1:
            raise ConfigError("n_groups must be >= 1")
        lo, hi = self.instances_per_group
        if not 1 <= lo <= hi:
            raise ConfigError(f"instances_per_group {self.instances_per_group} invalid")
        if len(self.shape_params) != self.k_true:
            raise ConfigError("need exactly k_true shape_params")
        if self.feature_noise < 0:
            raise ConfigError("feature_noise must be >= 0")
        if self.span_days <= 0:
            raise ConfigError("span_days must be > 0")
        if self.feature_prototypes is not None and len(self.feature_prototypes) != self.k_true:
            raise ConfigError("feature_prototypes must have one entry per shape")
        for p in self.shape_params:
            p.validate()

    def to_dict(self) -> dict:
        obj = {
            "n_groups": self.n_groups,
            "instances_per_group": list(self.instances_per_group),
            "k_true": self.k_true,
            "shape_params": [p.to_dict() for p in self.shape_params],
            "feature_noise": self.feature_noise,
            "seed": self.seed,
            "start": self.start.isoformat(),
            "span_days": self.span_days,
            "group_jitter": self.group_jitter,
        }
        if self.feature_prototypes is not None:
            obj["feature_prototypes"] = list(self.feature_prototypes)
        return obj

    @staticmethod
    def from_dict(obj: dict) -> "SynthConfig":
        protos = obj.get("feature_prototypes")
        return SynthConfig(
            n_groups=int(obj["n_groups"]),
            instances_per_group=tuple(obj["instances_per_group"]),
            k_true=int(obj["k_true"]),
            shape_params=tuple(ShapeParams.from_dict(p) for p in obj["shape_params"]),
            feature_noise=float(obj.get("feature_noise", 0.05)),
            seed=int(obj.get("seed", 0)),
            start=datetime.fromisoformat(obj["start"]) if "start" in obj
            else datetime(2021, 6, 1, tzinfo=timezone.utc),
            span_days=float(obj.get("span_days", 90.0)),
            group_jitter=float(obj.get("group_jitter", 0.15)),
            feature_prototypes=tuple(protos) if protos is not None else None,
        )

    @staticmethod
    def from_json_file(path) -> "SynthConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return SynthConfig.from_dict(json.load(fh))


def default_shape_params(k_true: int) -> tuple[ShapeParams, ...]:
    """Well-separated families: tight, wide, bimodal, outlier-heavy, then
    procedural variants for k_true > 4.

    The second-mode weight stays well below 0.5 so the group median
    reliably lands inside the main mode; otherwise the normalization
    anchor itself flips between modes and one family shows up as two
    normalized shapes.
    """
    base = [
        ShapeParams((30, 600), spread=0.04, outlier_prob=0.002),
        ShapeParams((30, 600), spread=0.5, outlier_prob=0.01),
        ShapeParams((30, 600), second_mode_offset=3.0, second_mode_weight=0.3, spread=0.05,
                    outlier_prob=0.01),
        ShapeParams((30, 600), spread=0.12, outlier_prob=0.30, outlier_scale=15.0),
    ]
    extra = [
        ShapeParams((30, 600), second_mode_offset=5.0, second_mode_weight=0.3, spread=0.06,
                    outlier_prob=0.03),
        ShapeParams((30, 600), spread=0.8, outlier_prob=0.05),
        ShapeParams((30, 600), second_mode_offset=7.0, second_mode_weight=0.25, spread=0.1,
                    outlier_prob=0.08),
        ShapeParams((30, 600), spread=0.3, outlier_prob=0.15, outlier_scale=20.0),
    ]
    families = (base + extra) * (k_true // 8 + 1)
    return tuple(families[:k_true])


def default_prototype(shape_idx: int) -> dict:
    """Procedural feature prototype for one shape family."""
    s = shape_idx
    spare_cycle = (1.0, 30.0, 14.0, 55.0)
    return {
        "vertex_count": 60.0 + 45.0 * s,
        "cardinality_est": 1e5 * (3.0 ** s),
        "input_bytes": 2e8 * (2.5 ** s),
        "temp_read_bytes": 7e7 * (2.5 ** s),
        "token_alloc": 60.0 + 25.0 * s,
        "token_avg": 35.0 + 18.0 * s,
        "spare_token_avg": spare_cycle[s % 4] + 5.0 * (s // 4),
        "cpu_util_mean": 0.2 + 0.55 * ((s % 4) / 3.0),
        "cpu_util_std": 0.02 + 0.10 * ((s * 7 % 5) / 4.0),
        "sku_weights": [1.0 + 3.0 * (j == s % len(SKUS)) for j in range(len(SKUS))],
    }


def _random_plan(rng: np.random.Generator) -> OperatorDag:
    """Random single-root tree whose root is always one Output operator."""
    n_inner = 2 + int(rng.integers(0, 5))
    types = [OPERATORS[int(t)] for t in rng.integers(0, len(OPERATORS), n_inner)]
    children: list[list[int]] = [[] for _ in range(n_inner + 1)]
    for j in range(1, n_inner + 1):
        parent = int(rng.integers(0, j))
        children[parent].append(j)
    nodes = [DagNode("Output", tuple(children[0]))]
    for j in range(1, n_inner + 1):
        nodes.append(DagNode(types[j - 1], tuple(children[j])))
    return OperatorDag(tuple(nodes))


def _draw_ratio(rng: np.random.Generator, p: ShapeParams) -> float:
    u = rng.random()
    z = rng.normal()
    if u < p.outlier_prob:
        return p.outlier_scale * float(np.exp(0.05 * z))
    if u < p.outlier_prob + (1.0 - p.outlier_prob) * p.second_mode_weight:
        return p.second_mode_offset * float(np.exp(p.spread * z))
    return float(np.exp(p.spread * z))


def generate_workload(config: SynthConfig) -> Dataset:
    """Generate a Dataset with true_cluster set on every instance."""
    config.validate()
    protos = [
        dict(default_prototype(s), **(config.feature_prototypes[s] if config.feature_prototypes else {}))
        for s in range(config.k_true)
    ]
    span_seconds = config.span_days * 86400.0
    lo, hi = config.instances_per_group
    groups = []
    for g in range(config.n_groups):
        rng = np.random.default_rng([config.seed & _U64, g])
        s = g % config.k_true
        params = config.shape_params[s]
        proto = protos[s]
        median = float(rng.uniform(*params.median_range))
        n = int(rng.integers(lo, hi + 1))
        offsets = np.sort(rng.uniform(0.0, span_seconds, n))
        plan = _random_plan(rng)
        op_counts: dict[str, float] = {}
        for node in plan.nodes:
            op_counts[node.operator_type] = op_counts.get(node.operator_type, 0.0) + 1.0
        jitter = {
            k: float(np.exp(rng.normal(0.0, config.group_jitter))) for k in _SCALE_KEYS
        }
        noise = config.feature_noise
        instances = []
        for i in range(n):
            submit = config.start + timedelta(seconds=float(offsets[i]))
            ratio = _draw_ratio(rng, params)
            runtime = median * ratio

            def scale(key: str) -> float:
                base = proto[key] * jitter[key]
                return max(0.0, base * (1.0 + noise * rng.normal()))

            vertex_count = max(1, int(round(scale("vertex_count"))))
            cardinality = scale("cardinality_est")
            input_bytes = scale("input_bytes")
            temp_read = scale("temp_read_bytes")
            token_alloc = scale("token_alloc")
            token_avg = scale("token_avg")
            token_min = token_avg * (0.35 + 0.3 * rng.random())
            token_max = token_avg * (1.2 + 0.8 * rng.random())
            spare = scale("spare_token_avg")
            w = np.asarray(proto["sku_weights"], dtype=np.float64) + noise * 0.5 * rng.normal(
                size=len(SKUS)
            )
            np.clip(w, 0.0, None, out=w)
            if w.sum() <= 0:
                w[:] = 1.0
            w /= w.sum()
            cpu_mean = {}
            cpu_std = {}
            for j, sku in enumerate(SKUS):
                m = proto["cpu_util_mean"] + 0.04 * (j - 1.5) + noise * 0.05 * rng.normal()
                cpu_mean[sku] = float(np.clip(m, 0.01, 0.99))
                sd = proto["cpu_util_std"] * (1.0 + noise * rng.normal())
                cpu_std[sku] = float(np.clip(sd, 0.0, 0.5))
            instances.append(
                JobInstance(
                    job_id=f"J{g:05d}_{i:04d}",
                    raw_name=f"synth_{g:05d}_{submit.date().isoformat()}",
                    submit_time=submit,
                    runtime=runtime,
                    plan=plan,
                    input_bytes=input_bytes,
                    temp_read_bytes=temp_read,
                    vertex_count=vertex_count,
                    token_alloc=token_alloc,
                    token_min=token_min,
                    token_max=token_max,
                    token_avg=token_avg,
                    spare_token_avg=spare,
                    sku_vertex_fraction={sku: float(w[j]) for j, sku in enumerate(SKUS)},
                    cpu_util_mean=cpu_mean,
                    cpu_util_std=cpu_std,
                    cardinality_est=cardinality,
                    operator_counts=op_counts,
                    true_cluster=s,
                )
            )
        key = GroupKey(normalize_job_name(instances[0].raw_name), plan_signature(plan))
        instances.sort(key=lambda inst: (inst.submit_time, inst.job_id))
        groups.append(JobGroup(key, tuple(instances)))
    groups.sort(key=lambda grp: grp.key)
    return Dataset(groups=groups, role="cluster_fit", min_support=1)


# --- presets ---------------------------------------------------------------

def separable_config(
    n_groups: int = 200,
    k_true: int = 4,
    seed: int = 42,
    feature_noise: float = 0.05,
    instances_per_group: tuple[int, int] = (30, 60),
) -> SynthConfig:
    """The documented "separable" preset: well-separated shapes, mild noise."""
    return SynthConfig(
        n_groups=n_groups,
        instances_per_group=instances_per_group,
        k_true=k_true,
        shape_params=default_shape_params(k_true),
        feature_noise=feature_noise,
        seed=seed,
    )


def heavy_tailed_config(
    n_groups: int = 240, seed: int = 0, instances_per_group: tuple[int, int] = (20, 40)
) -> SynthConfig:
    """Bimodal and outlier-heavy families dominate; used for the
    distribution-prediction comparison."""
    shapes = (
        ShapeParams((30, 600), second_mode_offset=3.0, second_mode_weight=0.4, spread=0.12,
                    outlier_prob=0.03),
        ShapeParams((30, 600), spread=0.15, outlier_prob=0.25, outlier_scale=18.0),
        ShapeParams((30, 600), spread=0.05, outlier_prob=0.002),
        ShapeParams((30, 600), spread=0.5, outlier_prob=0.05),
    )
    return SynthConfig(
        n_groups=n_groups,
        instances_per_group=instances_per_group,
        k_true=len(shapes),
        shape_params=shapes,
        feature_noise=0.05,
        seed=seed,
    )


def whatif_mechanism_config(
    n_groups: int = 300, seed: int = 11, instances_per_group: tuple[int, int] = (20, 40)
) -> SynthConfig:
    """Two shapes whose feature prototypes differ only in spare-token usage.

    The stable shape runs with essentially no spare tokens; the volatile
    one leans on them. Zeroing the spare-token feature is then the planted
    mechanism that moves predictions toward the low-IQR cluster.
    """
    shapes = (
        ShapeParams((60, 300), spread=0.05, outlier_prob=0.002),
        ShapeParams((60, 300), spread=0.5, outlier_prob=0.12, outlier_scale=14.0),
    )
    shared = default_prototype(0)
    stable = dict(shared, spare_token_avg=1.0)
    volatile = dict(shared, spare_token_avg=50.0)
    return SynthConfig(
        n_groups=n_groups,
        instances_per_group=instances_per_group,
        k_true=2,
        shape_params=shapes,
        feature_noise=0.05,
        seed=seed,
        feature_prototypes=(stable, volatile),
    )


PRESETS = {
    "separable": separable_config,
    "heavy-tailed": heavy_tailed_config,
    "whatif-mechanism": whatif_mechanism_config,
}


def preset_config(name: str, **overrides) -> SynthConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    cfg = PRESETS[name]()
    return replace(cfg, **overrides) if overrides else cfg
