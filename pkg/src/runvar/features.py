"""Compile-time feature vectors and leakage-free time-based splits.

Every history-derived feature of an instance is computed from instances
strictly earlier in its group; a first occurrence gets sentinel values
(0 for counts and fractions, -1 for utilizations) with
n_prior_occurrences = 0 acting as the flag.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .clustering import ShapeModel, assign_membership
from .distribution import histogram, normalize_many
from .errors import EmptySplit, NoHistory, SchemaMismatch
from .telemetry import Dataset, GroupKey, JobGroup, JobInstance, historic_median, lower_median

KIND_INTRINSIC = "intrinsic"
KIND_RESOURCE = "resource"
KIND_ENVIRONMENT = "environment"
KIND_HISTORY = "history"

UTIL_SENTINEL = -1.0


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names; order is fixed for a trained model's lifetime."""

    names: tuple[str, ...]
    kinds: tuple[str, ...]
    skus: tuple[str, ...]
    operator_types: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != len(set(self.names)):
            raise ValueError("feature names must be unique")
        if len(self.names) != len(self.kinds):
            raise ValueError("kinds must parallel names")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def fingerprint(self) -> str:
        return hashlib.sha256("\x1f".join(self.names).encode()).hexdigest()[:16]

    def subset(self, keep_names) -> "FeatureSchema":
        keep = set(keep_names)
        pairs = [(n, k) for n, k in zip(self.names, self.kinds) if n in keep]
        return FeatureSchema(
            tuple(n for n, _ in pairs),
            tuple(k for _, k in pairs),
            self.skus,
            self.operator_types,
        )

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "kinds": list(self.kinds),
            "skus": list(self.skus),
            "operator_types": list(self.operator_types),
        }

    @staticmethod
    def from_dict(obj: dict) -> "FeatureSchema":
        return FeatureSchema(
            tuple(obj["names"]),
            tuple(obj["kinds"]),
            tuple(obj["skus"]),
            tuple(obj["operator_types"]),
        )


def build_schema(groups) -> FeatureSchema:
    """Discover operator and SKU vocabularies and lay out the feature order."""
    ops: set[str] = set()
    skus: set[str] = set()
    for g in groups:
        for inst in g.instances:
            ops.update(inst.operator_counts)
            skus.update(inst.sku_vertex_fraction)
            skus.update(inst.cpu_util_mean)
            skus.update(inst.cpu_util_std)
    op_list = tuple(sorted(ops))
    sku_list = tuple(sorted(skus))
    names: list[str] = []
    kinds: list[str] = []

    def add(name, kind):
        names.append(name)
        kinds.append(kind)

    for op in op_list:
        add(f"op_count.{op}", KIND_INTRINSIC)
    add("vertex_count", KIND_INTRINSIC)
    add("cardinality_est", KIND_INTRINSIC)
    for base in ("input_bytes", "temp_read_bytes"):
        add(f"{base}_hist_mean", KIND_INTRINSIC)
        add(f"{base}_hist_std", KIND_INTRINSIC)
    add("token_alloc", KIND_RESOURCE)
    for base in ("token_min", "token_max", "token_avg"):
        add(f"{base}_hist_mean", KIND_RESOURCE)
        add(f"{base}_hist_std", KIND_RESOURCE)
    add("spare_token_avg", KIND_RESOURCE)  # historic mean of spare-token usage
    for sku in sku_list:
        add(f"sku_frac.{sku}", KIND_ENVIRONMENT)
    for sku in sku_list:
        add(f"cpu_util_mean.{sku}", KIND_ENVIRONMENT)
    for sku in sku_list:
        add(f"cpu_util_std.{sku}", KIND_ENVIRONMENT)
    add("n_prior_occurrences", KIND_HISTORY)
    add("runtime_hist_mean", KIND_HISTORY)
    add("runtime_hist_std", KIND_HISTORY)
    add("runtime_hist_median", KIND_HISTORY)
    return FeatureSchema(tuple(names), tuple(kinds), sku_list, op_list)


@dataclass(eq=False)
class FeatureVector:
    values: np.ndarray
    schema: FeatureSchema
    label: int | None = None
    group_key: GroupKey | None = None
    instance_id: str | None = None
    submit_time: datetime | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.schema),):
            raise SchemaMismatch(
                f"vector length {values.shape} != schema size {len(self.schema)}"
            )
        if np.isnan(values).any():
            raise ValueError("feature vector contains NaN")

    def value_of(self, name: str) -> float:
        return float(self.values[self.schema.index(name)])

    def as_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.schema.names, self.values)}


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def extract_features(
    group: JobGroup, instance: JobInstance, schema: FeatureSchema
) -> FeatureVector:
    """Feature vector for one instance; history from strictly earlier instances."""
    prior = [i for i in group.instances if i.submit_time < instance.submit_time]
    values = np.zeros(len(schema), dtype=np.float64)

    hist: dict[str, tuple[float, float]] = {}
    for base, getter in (
        ("input_bytes", lambda i: i.input_bytes),
        ("temp_read_bytes", lambda i: i.temp_read_bytes),
        ("token_min", lambda i: i.token_min),
        ("token_max", lambda i: i.token_max),
        ("token_avg", lambda i: i.token_avg),
    ):
        hist[base] = _mean_std([getter(i) for i in prior])
    spare_mean, _ = _mean_std([i.spare_token_avg for i in prior])
    runtime_mean, runtime_std = _mean_std([i.runtime for i in prior])
    runtime_median = lower_median([i.runtime for i in prior]) if prior else 0.0

    for pos, name in enumerate(schema.names):
        if name.startswith("op_count."):
            values[pos] = instance.operator_counts.get(name[len("op_count."):], 0.0)
        elif name == "vertex_count":
            values[pos] = instance.vertex_count
        elif name == "cardinality_est":
            values[pos] = instance.cardinality_est
        elif name == "token_alloc":
            values[pos] = instance.token_alloc
        elif name == "spare_token_avg":
            values[pos] = spare_mean
        elif name.endswith("_hist_mean") and name[: -len("_hist_mean")] in hist:
            values[pos] = hist[name[: -len("_hist_mean")]][0]
        elif name.endswith("_hist_std") and name[: -len("_hist_std")] in hist:
            values[pos] = hist[name[: -len("_hist_std")]][1]
        elif name.startswith("sku_frac."):
            values[pos] = instance.sku_vertex_fraction.get(name[len("sku_frac."):], 0.0)
        elif name.startswith("cpu_util_mean."):
            values[pos] = instance.cpu_util_mean.get(
                name[len("cpu_util_mean."):], UTIL_SENTINEL
            )
        elif name.startswith("cpu_util_std."):
            values[pos] = instance.cpu_util_std.get(
                name[len("cpu_util_std."):], UTIL_SENTINEL
            )
        elif name == "n_prior_occurrences":
            values[pos] = len(prior)
        elif name == "runtime_hist_mean":
            values[pos] = runtime_mean
        elif name == "runtime_hist_std":
            values[pos] = runtime_std
        elif name == "runtime_hist_median":
            values[pos] = runtime_median
        else:
            raise KeyError(f"schema feature {name!r} has no extractor")
    return FeatureVector(
        values=values,
        schema=schema,
        group_key=group.key,
        instance_id=instance.job_id,
        submit_time=instance.submit_time,
    )


@dataclass(eq=False)
class ExampleSet:
    """Dense feature matrix plus the per-instance context evaluation needs."""

    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray | None
    runtimes: np.ndarray
    hist_medians: np.ndarray
    group_keys: list[GroupKey]
    instance_ids: list[str]
    submit_times: list[datetime]

    def __len__(self) -> int:
        return self.X.shape[0]

    def restrict(self, schema: FeatureSchema) -> "ExampleSet":
        cols = [self.schema.index(n) for n in schema.names]
        return ExampleSet(
            schema=schema,
            X=self.X[:, cols].copy(),
            y=self.y,
            runtimes=self.runtimes,
            hist_medians=self.hist_medians,
            group_keys=self.group_keys,
            instance_ids=self.instance_ids,
            submit_times=self.submit_times,
        )

    def feature_vector(self, row: int) -> FeatureVector:
        return FeatureVector(
            values=self.X[row].copy(),
            schema=self.schema,
            label=int(self.y[row]) if self.y is not None else None,
            group_key=self.group_keys[row],
            instance_id=self.instance_ids[row],
            submit_time=self.submit_times[row],
        )

    def to_csv(self, fh) -> None:
        fh.write(",".join(self.schema.names))
        if self.y is not None:
            fh.write(",label")
        fh.write("\n")
        for i in range(len(self)):
            fh.write(",".join(repr(float(v)) for v in self.X[i]))
            if self.y is not None:
                fh.write(f",{int(self.y[i])}")
            fh.write("\n")


@dataclass(frozen=True)
class TimeWindow:
    start: datetime
    end: datetime

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("window start must precede end")

    def contains(self, t: datetime) -> bool:
        return self.start <= t < self.end


def window_label_pmf(group: JobGroup, window: TimeWindow, spec, median_asof: datetime | None = None):
    """PMF of a group's normalized runtimes inside a window.

    The normalizing median is the historic one as of `median_asof`
    (default: the window start); groups with no earlier history fall back
    to their own in-window lower median. Returns (pmf, normalized values,
    median) or None when the group has no instance in the window.
    """
    members = group.within(window.start, window.end)
    if not members:
        return None
    runtimes = [i.runtime for i in members]
    try:
        median = historic_median(group, median_asof or window.start)
    except NoHistory:
        median = lower_median(runtimes)
    values = normalize_many(runtimes, median, spec.mode)
    return histogram(values, spec, group.key), values, median


def group_pmf(group: JobGroup, spec, smooth_fn=None):
    """Whole-group PMF normalized by the group's own lower median."""
    runtimes = [i.runtime for i in group.instances]
    median = lower_median(runtimes)
    values = normalize_many(runtimes, median, spec.mode)
    pmf = histogram(values, spec, group.key)
    if smooth_fn is not None:
        pmf = smooth_fn(pmf)
    return pmf, values, median


def split_by_time(
    dataset: Dataset,
    shape_model: ShapeModel,
    train_window: TimeWindow,
    test_window: TimeWindow,
    schema: FeatureSchema | None = None,
) -> tuple[ExampleSet, ExampleSet]:
    """Label instances via posterior membership and split them in time.

    Labels come from assign_membership of the group's raw in-window PMF
    against `shape_model`; every instance of the group inside the window
    inherits that label. Both windows normalize against the historic
    median as of the train-window start (all of it pre-split data), so a
    group keeps one normalization anchor across the split. Windows must
    be disjoint with train before test.
    """
    if train_window.end > test_window.start:
        raise ValueError("train window must end before the test window starts")
    if schema is None:
        schema = build_schema(dataset.groups)
    spec = shape_model.spec
    anchor = train_window.start

    def collect(window: TimeWindow) -> ExampleSet:
        rows, labels, runtimes, medians = [], [], [], []
        keys, ids, times = [], [], []
        for group in dataset.groups:
            got = window_label_pmf(group, window, spec, median_asof=anchor)
            if got is None:
                continue
            pmf, _, median = got
            label = assign_membership(pmf, shape_model).cluster_id
            for inst in group.within(window.start, window.end):
                fv = extract_features(group, inst, schema)
                rows.append(fv.values)
                labels.append(label)
                runtimes.append(inst.runtime)
                medians.append(median)
                keys.append(group.key)
                ids.append(inst.job_id)
                times.append(inst.submit_time)
        if not rows:
            raise EmptySplit(f"no instance in window {window.start}..{window.end}")
        return ExampleSet(
            schema=schema,
            X=np.asarray(rows, dtype=np.float64),
            y=np.asarray(labels, dtype=np.int64),
            runtimes=np.asarray(runtimes, dtype=np.float64),
            hist_medians=np.asarray(medians, dtype=np.float64),
            group_keys=keys,
            instance_ids=ids,
            submit_times=times,
        )

    return collect(train_window), collect(test_window)


def timeline_windows(dataset: Dataset, fractions=(0.5, 0.3, 0.2)):
    """Carve the dataset's time span into consecutive windows by fraction."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    start, end = dataset.time_span()
    span = (end - start).total_seconds() + 1.0  # keep the last instance inside
    windows = []
    t = start
    acc = 0.0
    for f in fractions:
        acc += f
        nxt = start + _seconds(acc * span)
        windows.append(TimeWindow(t, nxt))
        t = nxt
    return windows


def _seconds(s: float):
    from datetime import timedelta

    return timedelta(seconds=s)


def scan_temporal_leakage(groups, schema: FeatureSchema, extractor=extract_features):
    """Check that history features depend only on strictly earlier instances.

    For every instance, re-extracts its features from a truncated copy of
    the group that drops everything at/after its submit time; any
    difference is a leak. Returns a list of (group_key, instance_id)
    violations, empty when the extractor is leak-free.
    """
    violations = []
    for group in groups:
        for inst in group.instances:
            truncated = JobGroup(group.key, group.before(inst.submit_time) + (inst,))
            full = extractor(group, inst, schema)
            trunc = extractor(truncated, inst, schema)
            if not np.array_equal(full.values, trunc.values):
                violations.append((group.key.as_string(), inst.job_id))
    return violations
