"""K-means over smoothed PMF vectors and posterior-likelihood membership.

Fitting runs Lloyd iterations with k-means++ seeding (best of several
restarts), then relabels clusters by ascending 25-75th percentile gap so
cluster 0 is always the steadiest shape. Membership of a group is the
cluster maximizing sum_h phi_h * log(theta_h), the Bayes assignment under
a uniform prior; centroid probabilities are floored before the log so
every score stays finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .distribution import BinningSpec, GroupPMF, distribution_stats
from .errors import SpecMismatch, TooFewGroups

CENTROID_FLOOR = 1e-6
STAT_KEYS = ("outlier_pct", "iqr_25_75", "p95", "std", "job_share")


@dataclass(eq=False)
class ShapeModel:
    """K characteristic normalized-runtime distributions plus their stats."""

    spec: BinningSpec
    k: int
    centroids: np.ndarray  # (k, H), rows sum to 1
    log_centroids: np.ndarray  # log of floored, renormalized centroids
    floored_centroids: np.ndarray
    stats: list[dict]
    cluster_order: list[int]
    fit_info: dict = field(default_factory=dict, repr=False, compare=False)

    @staticmethod
    def from_centroids(
        spec: BinningSpec,
        centroids: np.ndarray,
        stats: list[dict] | None = None,
        cluster_order: list[int] | None = None,
    ) -> "ShapeModel":
        centroids = np.asarray(centroids, dtype=np.float64)
        k = centroids.shape[0]
        if centroids.shape[1] != spec.n_bins:
            raise SpecMismatch(
                f"centroid length {centroids.shape[1]} != spec H={spec.n_bins}"
            )
        floored = np.maximum(centroids, CENTROID_FLOOR)
        floored /= floored.sum(axis=1, keepdims=True)
        if stats is None:
            stats = [_stats_from_centroid(spec, centroids[i]) for i in range(k)]
        return ShapeModel(
            spec=spec,
            k=k,
            centroids=centroids,
            log_centroids=np.log(floored),
            floored_centroids=floored,
            stats=stats,
            cluster_order=cluster_order if cluster_order is not None else list(range(k)),
        )

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "k": self.k,
            "centroids": [[float(v) for v in row] for row in self.centroids],
            "stats": [{s: float(st[s]) for s in STAT_KEYS} for st in self.stats],
            "cluster_order": list(self.cluster_order),
        }

    @staticmethod
    def from_dict(obj: dict) -> "ShapeModel":
        spec = BinningSpec.from_dict(obj["spec"])
        return ShapeModel.from_centroids(
            spec,
            np.asarray(obj["centroids"], dtype=np.float64),
            stats=[dict(st) for st in obj["stats"]],
            cluster_order=list(obj["cluster_order"]),
        )


@dataclass(frozen=True, eq=False)
class MembershipLabel:
    cluster_id: int
    log_likelihoods: np.ndarray  # length K, up to the shared constant
    n_samples: int


def assign_membership(pmf: GroupPMF, model: ShapeModel) -> MembershipLabel:
    """Most likely cluster for a raw observation PMF.

    Scores are dot(phi, log theta_i); ties break to the lowest cluster id.
    """
    if pmf.spec != model.spec:
        raise SpecMismatch("PMF and model use different binning specs")
    if pmf.n_samples < 1:
        raise ValueError("PMF must summarize at least one observation")
    scores = model.log_centroids @ pmf.probs
    return MembershipLabel(int(np.argmax(scores)), scores, pmf.n_samples)


def _stats_from_centroid(spec: BinningSpec, centroid: np.ndarray) -> dict:
    """Approximate stats from bin representatives, used when pooled member
    values are not available."""
    reps = spec.representative_values()
    order = np.argsort(reps, kind="stable")
    r, w = reps[order], centroid[order]
    cw = np.cumsum(w)
    total = cw[-1]

    def q(p):
        return float(np.interp(p * total, cw, r))

    mean = float((r * w).sum() / total)
    var = float((w * (r - mean) ** 2).sum() / total)
    return {
        "outlier_pct": float(centroid[spec.upper_outlier_index]),
        "iqr_25_75": q(0.75) - q(0.25),
        "p95": q(0.95),
        "std": var ** 0.5,
        "job_share": float("nan"),
    }


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = x[first]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(x, k, rng, max_iter, tol):
    centroids = _kmeans_pp_init(x, k, rng)
    labels, inertia = _kernels.kmeans_assign(x, centroids)
    history = [inertia]
    for _ in range(max_iter):
        new_centroids = np.zeros_like(centroids)
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        np.add.at(new_centroids, labels, x)
        empty = counts == 0
        if empty.any():
            # re-seed empty clusters on the points farthest from their centroid
            dists = ((x - centroids[labels]) ** 2).sum(axis=1)
            far = np.argsort(dists, kind="stable")[::-1]
            for j, e in enumerate(np.nonzero(empty)[0]):
                p = far[j % len(far)]
                new_centroids[e] = x[p]
                counts[e] = 1.0
        nonempty = counts > 0
        new_centroids[nonempty] /= counts[nonempty, None]
        centroids = new_centroids
        labels, new_inertia = _kernels.kmeans_assign(x, centroids)
        history.append(new_inertia)
        if new_inertia > inertia + 1e-9:
            raise RuntimeError(
                f"Lloyd iteration increased inertia: {inertia} -> {new_inertia}"
            )
        if inertia - new_inertia < tol * max(inertia, 1e-12):
            inertia = new_inertia
            break
        inertia = new_inertia
    return labels, centroids, inertia, history


def kmeans_fit(
    pmfs: list[GroupPMF],
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    n_restarts: int = 5,
    group_values: list[np.ndarray] | None = None,
) -> ShapeModel:
    """Cluster smoothed group PMFs into k shapes.

    Per-cluster stats are computed from the member groups' pooled
    normalized values when `group_values` is given (one array per PMF, in
    order); otherwise they fall back to a bin-midpoint approximation.
    Clusters are relabeled by ascending IQR.
    """
    if len(pmfs) < k:
        raise TooFewGroups(f"{len(pmfs)} PMFs for k={k}")
    spec = pmfs[0].spec
    for p in pmfs:
        if p.spec != spec:
            raise SpecMismatch("all PMFs must share one binning spec")
    if group_values is not None and len(group_values) != len(pmfs):
        raise ValueError("group_values must parallel pmfs")
    x = np.ascontiguousarray([p.probs for p in pmfs], dtype=np.float64)
    best = None
    histories = []
    for r in range(n_restarts):
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, r])
        labels, centroids, inertia, history = _lloyd(x, k, rng, max_iter, tol)
        histories.append(history)
        if best is None or inertia < best[2] - 1e-12:
            best = (labels, centroids, inertia, r)
    labels, centroids, inertia, best_restart = best

    centroids = np.clip(centroids, 0.0, None)
    sums = centroids.sum(axis=1, keepdims=True)
    uniform = np.full(x.shape[1], 1.0 / x.shape[1])
    for j in range(k):
        if sums[j, 0] <= 0:
            centroids[j] = uniform
        else:
            centroids[j] /= sums[j, 0]

    stats, total_obs = [], 0
    pooled = []
    for j in range(k):
        member_idx = np.nonzero(labels == j)[0]
        if group_values is not None:
            vals = (
                np.concatenate([np.asarray(group_values[i], dtype=np.float64) for i in member_idx])
                if len(member_idx)
                else np.empty(0)
            )
        else:
            vals = np.empty(0)
        pooled.append(vals)
        total_obs += len(vals)
    for j in range(k):
        vals = pooled[j]
        if len(vals) >= 2:
            st = distribution_stats(vals, spec)
            st["job_share"] = len(vals) / total_obs if total_obs else 0.0
        else:
            st = _stats_from_centroid(spec, centroids[j])
            st["job_share"] = float((labels == j).sum()) / len(pmfs)
        stats.append(st)

    order = np.argsort([st["iqr_25_75"] for st in stats], kind="stable")
    inverse = np.empty(k, dtype=np.int64)
    inverse[order] = np.arange(k)
    centroids = centroids[order]
    stats = [stats[i] for i in order]
    labels = inverse[labels]

    model = ShapeModel.from_centroids(spec, centroids, stats=stats)
    model.fit_info = {
        "inertia": float(inertia),
        "inertia_histories": histories,
        "labels": labels,
        "best_restart": best_restart,
        "n_groups": len(pmfs),
    }
    return model


def inertia_curve(pmfs, k_range, seed: int = 0, n_restarts: int = 5):
    """(k, best inertia) for each k, with seeds derived per k."""
    out = []
    for k in k_range:
        model = kmeans_fit(pmfs, k, seed=seed * 100003 + k, n_restarts=n_restarts)
        out.append((k, model.fit_info["inertia"]))
    return out


def elbow_k(curve) -> int:
    """k with the maximum second difference of inertia (advisory only)."""
    if len(curve) < 3:
        return curve[0][0]
    ks = [k for k, _ in curve]
    inertias = [v for _, v in curve]
    second = [inertias[i - 1] - 2 * inertias[i] + inertias[i + 1] for i in range(1, len(ks) - 1)]
    return ks[1 + int(np.argmax(second))]


def cluster_report(model: ShapeModel) -> list[dict]:
    """One row per cluster in cluster_order, Table-2-style columns."""
    rows = []
    for cid in model.cluster_order:
        st = model.stats[cid]
        rows.append(
            {
                "cluster": cid,
                "job_share": st["job_share"],
                "outlier_pct": st["outlier_pct"],
                "iqr_25_75": st["iqr_25_75"],
                "p95": st["p95"],
                "std": st["std"],
            }
        )
    return rows


def format_cluster_table(model: ShapeModel) -> str:
    lines = [
        f"{'cid':>4} {'% jobs':>8} {'outlier %':>10} {'25-75th':>10} {'95th':>10} {'std':>10}"
    ]
    for row in cluster_report(model):
        lines.append(
            f"{row['cluster']:>4} {100 * row['job_share']:>8.1f} "
            f"{100 * row['outlier_pct']:>10.2f} {row['iqr_25_75']:>10.3g} "
            f"{row['p95']:>10.3g} {row['std']:>10.3g}"
        )
    return "\n".join(lines)


def adjusted_rand_index(labels_a, labels_b) -> float:
    """ARI from the pair-counting contingency table."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("label arrays must have equal length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    n = comb2(a.size)
    expected = sum_a * sum_b / n if n else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))
