"""Pure-numpy implementations of the hot kernels.

Fallback path for environments without numba (or with RUNVAR_BACKEND=numpy).
Each function must produce results matching the numba twin bit-for-bit on
integer-derived quantities; see tests/test_kernels.py.
"""

import numpy as np


def bin_counts(values, lo, hi, n_interior, has_lower):
    """Histogram counts over interior bins plus merged outlier bin(s).

    Layout: [interior 0..n_interior-1] [lower outlier, if any] [upper outlier].
    """
    values = np.asarray(values, dtype=np.float64)
    h = n_interior + (2 if has_lower else 1)
    counts = np.zeros(h, dtype=np.int64)
    upper = values >= hi
    below = values < lo
    interior = ~(upper | below)
    counts[h - 1] = int(upper.sum())
    if has_lower:
        counts[n_interior] = int(below.sum())
    else:
        # ratio mode: lo is 0 and runtimes are positive, clamp defensively
        counts[0] += int(below.sum())
    iv = values[interior]
    idx = ((iv - lo) * (n_interior / (hi - lo))).astype(np.int64)
    np.clip(idx, 0, n_interior - 1, out=idx)
    counts[:n_interior] += np.bincount(idx, minlength=n_interior)
    return counts


def kmeans_assign(x, c):
    """Nearest-centroid labels and total squared distance (inertia)."""
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    d2 = (
        (x * x).sum(axis=1)[:, None]
        + (c * c).sum(axis=1)[None, :]
        - 2.0 * (x @ c.T)
    )
    np.clip(d2, 0.0, None, out=d2)
    labels = np.argmin(d2, axis=1).astype(np.int64)
    inertia = float(d2[np.arange(len(x)), labels].sum())
    return labels, inertia


def best_split_gini(x, idx, y, n_classes, feat_ids, min_leaf):
    """Best axis-aligned split by weighted child Gini impurity.

    Returns (feature, threshold, weighted_child_impurity); feature is -1 when
    no valid split exists. Ties keep the earliest feature in feat_ids and the
    lowest threshold position, matching the numba scan order.
    """
    n = idx.shape[0]
    yn = y[idx]
    best_feat, best_thr, best_imp = -1, 0.0, np.inf
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), yn] = 1
    total = onehot.sum(axis=0)
    for f in feat_ids:
        v = x[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        cum = np.cumsum(onehot[order], axis=0)
        left = cum[:-1].astype(np.float64)
        right = (total - cum[:-1]).astype(np.float64)
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        sumsq_l = (left * left).sum(axis=1)
        sumsq_r = (right * right).sum(axis=1)
        imp = (nl - sumsq_l / nl + nr - sumsq_r / nr) / n
        valid = (vs[1:] != vs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        imp = np.where(valid, imp, np.inf)
        i = int(np.argmin(imp))
        if imp[i] < best_imp:
            best_imp = float(imp[i])
            best_feat = int(f)
            best_thr = 0.5 * (vs[i] + vs[i + 1])
    return best_feat, best_thr, best_imp


def best_split_mse(x, idx, y, feat_ids, min_leaf):
    """Best axis-aligned split by total child sum of squared errors."""
    n = idx.shape[0]
    if n < 2:
        return -1, 0.0, np.inf
    yn = y[idx].astype(np.float64)
    best_feat, best_thr, best_sse = -1, 0.0, np.inf
    for f in feat_ids:
        v = x[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        ys = yn[order]
        cs = np.cumsum(ys)[:-1]
        css = np.cumsum(ys * ys)[:-1]
        tot = cs[-1] + ys[-1]
        tot_ss = css[-1] + ys[-1] * ys[-1]
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        sse = (css - cs * cs / nl) + ((tot_ss - css) - (tot - cs) ** 2 / nr)
        valid = (vs[1:] != vs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        sse = np.where(valid, sse, np.inf)
        i = int(np.argmin(sse))
        if sse[i] < best_sse:
            best_sse = float(sse[i])
            best_feat = int(f)
            best_thr = 0.5 * (vs[i] + vs[i + 1])
    return best_feat, best_thr, best_sse


def tree_apply(x, feature, threshold, left, right):
    """Leaf node index for each row; internal nodes have left[i] >= 0."""
    n = x.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = left[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        cur = node[rows]
        go_left = x[rows, feature[cur]] <= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active = left[node] >= 0
    return node
