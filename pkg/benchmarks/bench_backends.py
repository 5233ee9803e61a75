#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Imports both implementations directly (no env flag needed) and times the
hot paths on representative workloads. Run:

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from runvar._kernels import numba_impl, numpy_impl


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm-up (JIT compile / cache touch)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)

    # histogram binning: 1M normalized ratios
    values = np.abs(rng.lognormal(0.0, 0.6, 1_000_000))
    bin_args = (values, 0.0, 10.0, 200, False)

    # k-means assignment: 2000 PMFs x 201 bins against 8 centroids
    x = rng.dirichlet(np.ones(201), size=2000)
    c = rng.dirichlet(np.ones(201), size=8)
    km_args = (x, c)

    # split search: one node with 20k samples, 40 candidate features
    xs = rng.normal(size=(20_000, 40))
    ys = rng.integers(0, 4, 20_000).astype(np.int64)
    idx = np.arange(20_000, dtype=np.int64)
    feats = np.arange(40, dtype=np.int64)
    gini_args = (xs, idx, ys, 4, feats, 1)
    yr = rng.normal(size=20_000)
    mse_args = (xs, idx, yr, feats, 1)

    # batch traversal: 200k rows through one depth-12 chain tree
    n_nodes = 25
    feature = rng.integers(0, 40, n_nodes).astype(np.int64)
    threshold = rng.normal(size=n_nodes)
    left = np.full(n_nodes, -1, dtype=np.int64)
    right = np.full(n_nodes, -1, dtype=np.int64)
    for i in range(0, n_nodes - 2, 2):
        left[i] = i + 1
        right[i] = i + 2
    xt = rng.normal(size=(200_000, 40))
    apply_args = (xt, feature, threshold, left, right)

    cases = [
        ("bin_counts (1M values)", "bin_counts", bin_args),
        ("kmeans_assign (2000x201, k=8)", "kmeans_assign", km_args),
        ("best_split_gini (20k x 40)", "best_split_gini", gini_args),
        ("best_split_mse (20k x 40)", "best_split_mse", mse_args),
        ("tree_apply (200k rows)", "tree_apply", apply_args),
    ]

    print(f"{'kernel':<34} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for label, name, args in cases:
        t_np = timeit(getattr(numpy_impl, name), *args)
        t_nb = timeit(getattr(numba_impl, name), *args)
        print(f"{label:<34} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
