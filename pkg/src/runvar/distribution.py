"""Normalized-runtime PMFs: binning with merged outlier bins, smoothing, stats.

Runtimes are normalized against the group's historic median either as a
ratio (runtime / median, unitless) or a delta (runtime - median, seconds).
Histograms use uniform interior bins over a fixed range plus merged
outlier bins beyond it: one upper bin for ratio mode (values >= 10x the
median), a lower and an upper bin for delta mode (|delta| >= 900 s).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import EmptySample, InsufficientSamples, NonPositiveMedian, SpecMismatch
from .telemetry import GroupKey


class NormalizationMode(str, Enum):
    RATIO = "ratio"
    DELTA = "delta"


RATIO_OUTLIER_FACTOR = 10.0
DELTA_OUTLIER_SECONDS = 900.0
DEFAULT_INTERIOR_BINS = 200


@dataclass(frozen=True)
class BinningSpec:
    """Histogram layout: interior bins over [lo, hi) plus outlier bin(s).

    Vector layout is [interior 0..n_interior-1][lower outlier (delta only)]
    [upper outlier].
    """

    mode: NormalizationMode
    lo: float
    hi: float
    n_interior: int = DEFAULT_INTERIOR_BINS

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"lo {self.lo} must be < hi {self.hi}")
        if self.n_interior < 2:
            raise ValueError("n_interior must be >= 2")

    @staticmethod
    def ratio_default(n_interior: int = DEFAULT_INTERIOR_BINS) -> "BinningSpec":
        return BinningSpec(NormalizationMode.RATIO, 0.0, RATIO_OUTLIER_FACTOR, n_interior)

    @staticmethod
    def delta_default(n_interior: int = DEFAULT_INTERIOR_BINS) -> "BinningSpec":
        return BinningSpec(
            NormalizationMode.DELTA, -DELTA_OUTLIER_SECONDS, DELTA_OUTLIER_SECONDS, n_interior
        )

    @staticmethod
    def for_mode(mode: NormalizationMode, n_interior: int = DEFAULT_INTERIOR_BINS) -> "BinningSpec":
        if NormalizationMode(mode) is NormalizationMode.RATIO:
            return BinningSpec.ratio_default(n_interior)
        return BinningSpec.delta_default(n_interior)

    @property
    def has_lower_outlier(self) -> bool:
        return self.mode is NormalizationMode.DELTA

    @property
    def n_bins(self) -> int:
        return self.n_interior + (2 if self.has_lower_outlier else 1)

    @property
    def upper_outlier_index(self) -> int:
        return self.n_bins - 1

    @property
    def lower_outlier_index(self) -> int | None:
        return self.n_interior if self.has_lower_outlier else None

    def bin_index(self, value: float) -> int:
        """Bin index for one normalized value (mirrors the binning kernel)."""
        if value >= self.hi:
            return self.upper_outlier_index
        if value < self.lo:
            return self.lower_outlier_index if self.has_lower_outlier else 0
        b = int((value - self.lo) * (self.n_interior / (self.hi - self.lo)))
        return min(b, self.n_interior - 1)

    def representative_values(self) -> np.ndarray:
        """One value per bin: interior midpoints, thresholds for outlier bins."""
        edges = np.linspace(self.lo, self.hi, self.n_interior + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        reps = np.empty(self.n_bins)
        reps[: self.n_interior] = mids
        if self.has_lower_outlier:
            reps[self.lower_outlier_index] = self.lo
        reps[self.upper_outlier_index] = self.hi
        return reps

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "lo": self.lo,
            "hi": self.hi,
            "n_interior": self.n_interior,
        }

    @staticmethod
    def from_dict(obj: dict) -> "BinningSpec":
        return BinningSpec(
            NormalizationMode(obj["mode"]), float(obj["lo"]), float(obj["hi"]),
            int(obj["n_interior"]),
        )

    def fingerprint(self) -> str:
        key = f"{self.mode.value}|{self.lo!r}|{self.hi!r}|{self.n_interior}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class GroupPMF:
    """Empirical probability mass function of a group's normalized runtimes."""

    spec: BinningSpec
    probs: np.ndarray
    n_samples: int
    group_key: GroupKey | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if probs.shape != (self.spec.n_bins,):
            raise SpecMismatch(
                f"probs length {probs.shape} does not match spec H={self.spec.n_bins}"
            )
        if (probs < 0).any():
            raise ValueError("PMF has negative probabilities")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"PMF sums to {total}, not 1")

    def to_dict(self) -> dict:
        return {
            **self.spec.to_dict(),
            "probs": [float(p) for p in self.probs],
            "n_samples": int(self.n_samples),
        }

    @staticmethod
    def from_dict(obj: dict) -> "GroupPMF":
        spec = BinningSpec.from_dict(obj)
        return GroupPMF(spec, np.asarray(obj["probs"], dtype=np.float64), int(obj["n_samples"]))


def normalize_runtime(runtime: float, median: float, mode: NormalizationMode) -> float:
    """Ratio: runtime/median. Delta: runtime - median (seconds)."""
    if median <= 0:
        raise NonPositiveMedian(f"median {median}")
    if NormalizationMode(mode) is NormalizationMode.RATIO:
        return runtime / median
    return runtime - median


def normalize_many(runtimes, median: float, mode: NormalizationMode) -> np.ndarray:
    if median <= 0:
        raise NonPositiveMedian(f"median {median}")
    arr = np.asarray(runtimes, dtype=np.float64)
    if NormalizationMode(mode) is NormalizationMode.RATIO:
        return arr / median
    return arr - median


def histogram(values, spec: BinningSpec, group_key: GroupKey | None = None) -> GroupPMF:
    """Bin normalized values into a GroupPMF (counts / N)."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptySample("histogram of zero values")
    counts = _kernels.bin_counts(arr, spec.lo, spec.hi, spec.n_interior, spec.has_lower_outlier)
    return GroupPMF(spec, counts / arr.size, int(arr.size), group_key)


def smooth(pmf: GroupPMF) -> GroupPMF:
    """Convolve interior bins with [0.25, 0.5, 0.25], boundary-renormalized.

    Outlier-bin masses are untouched; interior mass is rescaled back to its
    pre-smoothing total so the PMF still sums to 1.
    """
    n = pmf.spec.n_interior
    interior = pmf.probs[:n]
    total = interior.sum()
    out = np.convolve(interior, [0.25, 0.5, 0.25], mode="same")
    # 'same' truncates the kernel at the edges; renormalize those two bins
    out[0] = (0.5 * interior[0] + 0.25 * interior[1]) / 0.75
    out[-1] = (0.5 * interior[-1] + 0.25 * interior[-2]) / 0.75
    s = out.sum()
    if s > 0:
        out *= total / s
    probs = pmf.probs.copy()
    probs[:n] = out
    return GroupPMF(pmf.spec, probs, pmf.n_samples, pmf.group_key)


def distribution_stats(values, spec: BinningSpec) -> dict:
    """Table-style stats of a normalized-value sample.

    outlier_pct counts the slow tail only (values at/above the upper
    threshold), matching how the per-cluster tables report outliers.
    Quantiles use linear interpolation; std is the population one.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        raise InsufficientSamples(f"need >= 2 values, got {arr.size}")
    p25, p75, p95 = np.quantile(arr, [0.25, 0.75, 0.95])
    return {
        "outlier_pct": float((arr >= spec.hi).sum() / arr.size),
        "iqr_25_75": float(p75 - p25),
        "p95": float(p95),
        "std": float(arr.std()),
    }
