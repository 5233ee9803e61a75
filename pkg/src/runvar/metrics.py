"""Scalar baseline metrics: COV, quantiles, historic-vs-future correlation pairs.

These are the metrics the distribution-shape method supersedes; they feed
evaluation reports and the `metrics` CLI subcommand.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .distribution import BinningSpec, normalize_many
from .errors import InsufficientSamples, NoFuture, NoHistory
from .telemetry import JobGroup, lower_median


@dataclass(frozen=True)
class ScalarSummary:
    mean: float
    median: float
    cov: float
    p95: float
    outlier_rate: float


def scalar_summary(samples, spec: BinningSpec | None = None) -> ScalarSummary:
    """Mean, lower median, COV (population std / mean), p95, outlier rate.

    The outlier rate is the fraction of samples whose normalized value
    (against the sample's own lower median) falls at/above the upper
    threshold of `spec` (ratio default: >= 10x median).
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size < 2:
        raise InsufficientSamples(f"need >= 2 samples, got {arr.size}")
    if (arr <= 0).any():
        raise ValueError("runtimes must be > 0")
    if spec is None:
        spec = BinningSpec.ratio_default()
    med = lower_median(arr)
    normalized = normalize_many(arr, med, spec.mode)
    return ScalarSummary(
        mean=float(arr.mean()),
        median=med,
        cov=float(arr.std() / arr.mean()),
        p95=float(np.quantile(arr, 0.95)),
        outlier_rate=float((normalized >= spec.hi).sum() / arr.size),
    )


def historic_vs_future_pairs(
    group: JobGroup, split_time: datetime, metric: str = "median"
) -> list[tuple[float, float]]:
    """(historic value, future value) pairs for one group.

    metric="median": one pair per future instance, historic median against
    that instance's runtime (the scatter whose off-diagonal mode is the
    stalagmite). metric="cov"/"p95": a single pair comparing the statistic
    on both sides of the split.
    """
    prior = [i.runtime for i in group.instances if i.submit_time < split_time]
    future = [i.runtime for i in group.instances if i.submit_time >= split_time]
    if not prior:
        raise NoHistory(f"group {group.key.as_string()} has no instance before split")
    if not future:
        raise NoFuture(f"group {group.key.as_string()} has no instance after split")
    if metric == "median":
        h = lower_median(prior)
        return [(h, r) for r in future]
    if metric == "cov":
        return [(_cov(prior), _cov(future))]
    if metric == "p95":
        return [
            (float(np.quantile(prior, 0.95)), float(np.quantile(future, 0.95)))
        ]
    raise ValueError(f"unknown metric {metric!r}")


def _cov(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.std() / arr.mean())


def pairs_to_csv(pairs, fh) -> None:
    """Write (historic, future) pairs with the canonical CSV header."""
    writer = csv.writer(fh)
    writer.writerow(["historic", "future"])
    for h, f in pairs:
        writer.writerow([repr(float(h)), repr(float(f))])
