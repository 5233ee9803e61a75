"""numba @njit implementations of the hot kernels.

Importing this module requires numba; the package falls back to
numpy_impl when it is unavailable or RUNVAR_BACKEND=numpy is set.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def bin_counts(values, lo, hi, n_interior, has_lower):
    h = n_interior + (2 if has_lower else 1)
    counts = np.zeros(h, dtype=np.int64)
    inv_width = n_interior / (hi - lo)
    for i in range(values.shape[0]):
        v = values[i]
        if v >= hi:
            counts[h - 1] += 1
        elif v < lo:
            if has_lower:
                counts[n_interior] += 1
            else:
                counts[0] += 1
        else:
            b = int((v - lo) * inv_width)
            if b >= n_interior:
                b = n_interior - 1
            counts[b] += 1
    return counts


@njit(cache=True)
def kmeans_assign(x, c):
    n, h = x.shape
    k = c.shape[0]
    labels = np.empty(n, dtype=np.int64)
    inertia = 0.0
    for i in range(n):
        best = 0
        bestd = np.inf
        for j in range(k):
            d = 0.0
            for t in range(h):
                diff = x[i, t] - c[j, t]
                d += diff * diff
            if d < bestd:
                bestd = d
                best = j
        labels[i] = best
        inertia += bestd
    return labels, inertia


@njit(cache=True)
def best_split_gini(x, idx, y, n_classes, feat_ids, min_leaf):
    n = idx.shape[0]
    parent = np.zeros(n_classes, dtype=np.int64)
    for i in range(n):
        parent[y[idx[i]]] += 1
    best_feat = -1
    best_thr = 0.0
    best_imp = np.inf
    vals = np.empty(n, dtype=np.float64)
    for fi in range(feat_ids.shape[0]):
        f = feat_ids[fi]
        for i in range(n):
            vals[i] = x[idx[i], f]
        order = np.argsort(vals)
        left = np.zeros(n_classes, dtype=np.int64)
        right = parent.copy()
        sumsq_l = 0.0
        sumsq_r = 0.0
        for c in range(n_classes):
            sumsq_r += right[c] * right[c]
        for i in range(n - 1):
            c = y[idx[order[i]]]
            sumsq_l += 2.0 * left[c] + 1.0
            left[c] += 1
            sumsq_r += -2.0 * right[c] + 1.0
            right[c] -= 1
            v = vals[order[i]]
            if v == vals[order[i + 1]]:
                continue
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            imp = (nl - sumsq_l / nl + nr - sumsq_r / nr) / n
            if imp < best_imp:
                best_imp = imp
                best_feat = f
                best_thr = 0.5 * (v + vals[order[i + 1]])
    return best_feat, best_thr, best_imp


@njit(cache=True)
def best_split_mse(x, idx, y, feat_ids, min_leaf):
    n = idx.shape[0]
    best_feat = -1
    best_thr = 0.0
    best_sse = np.inf
    if n < 2:
        return best_feat, best_thr, best_sse
    vals = np.empty(n, dtype=np.float64)
    ys = np.empty(n, dtype=np.float64)
    for fi in range(feat_ids.shape[0]):
        f = feat_ids[fi]
        for i in range(n):
            vals[i] = x[idx[i], f]
        order = np.argsort(vals)
        tot = 0.0
        tot_ss = 0.0
        for i in range(n):
            yi = y[idx[order[i]]]
            ys[i] = yi
            tot += yi
            tot_ss += yi * yi
        sum_l = 0.0
        ss_l = 0.0
        for i in range(n - 1):
            yi = ys[i]
            sum_l += yi
            ss_l += yi * yi
            v = vals[order[i]]
            if v == vals[order[i + 1]]:
                continue
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            sum_r = tot - sum_l
            ss_r = tot_ss - ss_l
            sse = (ss_l - sum_l * sum_l / nl) + (ss_r - sum_r * sum_r / nr)
            if sse < best_sse:
                best_sse = sse
                best_feat = f
                best_thr = 0.5 * (v + vals[order[i + 1]])
    return best_feat, best_thr, best_sse


@njit(cache=True)
def tree_apply(x, feature, threshold, left, right):
    n = x.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while left[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
