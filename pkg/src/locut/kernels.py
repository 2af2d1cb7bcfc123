"""Hot inner loops: simplex pivoting, regression-tree growth, forest prediction.

Every kernel exists twice: a loop-based version compiled with numba and a
vectorised numpy version.  Both produce the same result for the same inputs
(same arithmetic, same tie-breaking), so the choice only affects speed.  The
exported names (``pivot``, ``build_tree``, ``predict_trees``) point at the
numba variants unless numba is missing or ``LOCUT_DISABLE_NUMBA`` is set.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

LEAF = -1


# --------------------------------------------------------------------------
# simplex pivot
# --------------------------------------------------------------------------


def pivot_numpy(tab, r, q):
    """Gauss-Jordan pivot of ``tab`` on element (r, q), in place."""
    prow = tab[r] / tab[r, q]
    col = tab[:, q].copy()
    col[r] = 0.0
    tab -= np.outer(col, prow)
    tab[r] = prow


@njit(cache=True, nogil=True)
def pivot_numba(tab, r, q):
    m, k = tab.shape
    piv = tab[r, q]
    for j in range(k):
        tab[r, j] = tab[r, j] / piv
    for i in range(m):
        if i == r:
            continue
        f = tab[i, q]
        if f == 0.0:
            continue
        for j in range(k):
            tab[i, j] = tab[i, j] - f * tab[r, j]


# --------------------------------------------------------------------------
# regression tree growth
# --------------------------------------------------------------------------


def _alloc_tree(max_nodes):
    feature = np.full(max_nodes, LEAF, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)
    count = np.zeros(max_nodes, dtype=np.int64)
    gain = np.zeros(max_nodes)
    return feature, threshold, left, right, value, count, gain


def build_tree_numpy(X, y, sample_idx, allowed, mtry, min_leaf, keys):
    """Grow one CART regression tree (variance reduction).

    ``sample_idx`` are the (bootstrap) rows; ``allowed`` the candidate feature
    columns; ``keys[node]`` holds one random key per allowed feature, and the
    ``mtry`` features with the smallest keys are tried at that node.  Returns
    flat node arrays ``(feature, threshold, left, right, value, count, gain,
    n_nodes)``; leaves have ``feature == -1``.
    """
    idx = np.array(sample_idx, dtype=np.int64)
    n = idx.shape[0]
    max_nodes = max(2 * n - 1, 1)
    feature, threshold, left, right, value, count, gain = _alloc_tree(max_nodes)
    n_nodes = 1
    stack = [(0, 0, n)]
    while stack:
        node, s, e = stack.pop()
        cnt = e - s
        rows = idx[s:e]
        ys = y[rows]
        total = np.cumsum(ys)[-1]
        value[node] = total / cnt
        count[node] = cnt
        if cnt < 2 * min_leaf or ys.max() - ys.min() <= 0.0:
            continue
        order = np.argsort(keys[node], kind="mergesort")
        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        for c in range(mtry):
            f = allowed[order[c]]
            xs = X[rows, f]
            o = np.argsort(xs, kind="mergesort")
            xs_s = xs[o]
            csum = np.cumsum(ys[o])
            i = np.arange(min_leaf, cnt - min_leaf + 1)
            valid = xs_s[i - 1] < xs_s[i]
            if not valid.any():
                continue
            sl = csum[i - 1]
            score = sl * sl / i + (total - sl) * (total - sl) / (cnt - i)
            score = np.where(valid, score, -np.inf)
            k = int(np.argmax(score))
            if score[k] > best_score:
                best_score = score[k]
                best_f = f
                lo = xs_s[i[k] - 1]
                hi = xs_s[i[k]]
                thr = 0.5 * (lo + hi)
                best_thr = thr if thr < hi else lo
        if best_f < 0:
            continue
        mask = X[rows, best_f] <= best_thr
        nl = int(mask.sum())
        idx[s:e] = np.concatenate((rows[mask], rows[~mask]))
        feature[node] = best_f
        threshold[node] = best_thr
        gain[node] = best_score - total * total / cnt
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack.append((n_nodes + 1, s + nl, e))
        stack.append((n_nodes, s, s + nl))
        n_nodes += 2
    return feature, threshold, left, right, value, count, gain, n_nodes


@njit(cache=True, nogil=True)
def build_tree_numba(X, y, sample_idx, allowed, mtry, min_leaf, keys):
    idx = sample_idx.astype(np.int64).copy()
    n = idx.shape[0]
    max_nodes = max(2 * n - 1, 1)
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)
    count = np.zeros(max_nodes, dtype=np.int64)
    gain = np.zeros(max_nodes)

    st_node = np.empty(max_nodes, dtype=np.int64)
    st_s = np.empty(max_nodes, dtype=np.int64)
    st_e = np.empty(max_nodes, dtype=np.int64)
    sp = 0
    st_node[0] = 0
    st_s[0] = 0
    st_e[0] = n
    sp = 1
    n_nodes = 1
    xs = np.empty(n)
    ys_s = np.empty(n)
    buf = np.empty(n, dtype=np.int64)
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        s = st_s[sp]
        e = st_e[sp]
        cnt = e - s
        total = 0.0
        ymin = np.inf
        ymax = -np.inf
        for t in range(s, e):
            v = y[idx[t]]
            total += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        value[node] = total / cnt
        count[node] = cnt
        if cnt < 2 * min_leaf or ymax - ymin <= 0.0:
            continue
        order = np.argsort(keys[node], kind="mergesort")
        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        for c in range(mtry):
            f = allowed[order[c]]
            for t in range(cnt):
                xs[t] = X[idx[s + t], f]
            o = np.argsort(xs[:cnt], kind="mergesort")
            csum = 0.0
            for t in range(cnt):
                ys_s[t] = y[idx[s + o[t]]]
            fbest = -np.inf
            fk = -1
            for t in range(cnt - min_leaf):
                csum += ys_s[t]
                i = t + 1
                if i < min_leaf:
                    continue
                if not xs[o[i - 1]] < xs[o[i]]:
                    continue
                sc = csum * csum / i + (total - csum) * (total - csum) / (cnt - i)
                if sc > fbest:
                    fbest = sc
                    fk = i
            if fk > 0 and fbest > best_score:
                best_score = fbest
                best_f = f
                lo = xs[o[fk - 1]]
                hi = xs[o[fk]]
                thr = 0.5 * (lo + hi)
                best_thr = thr if thr < hi else lo
        if best_f < 0:
            continue
        nl = 0
        nr = 0
        for t in range(s, e):
            if X[idx[t], best_f] <= best_thr:
                idx[s + nl] = idx[t]
                nl += 1
            else:
                buf[nr] = idx[t]
                nr += 1
        for t in range(nr):
            idx[s + nl + t] = buf[t]
        feature[node] = best_f
        threshold[node] = best_thr
        gain[node] = best_score - total * total / cnt
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_s[sp] = s + nl
        st_e[sp] = e
        sp += 1
        st_node[sp] = n_nodes
        st_s[sp] = s
        st_e[sp] = s + nl
        sp += 1
        n_nodes += 2
    return feature, threshold, left, right, value, count, gain, n_nodes


# --------------------------------------------------------------------------
# forest prediction
# --------------------------------------------------------------------------


def predict_trees_numpy(X, feature, threshold, left, right, value, roots):
    """Per-tree predictions, shape ``(n_samples, n_trees)``.

    Trees are stored back to back in the flat arrays; ``roots[t]`` is the
    position of tree ``t``'s root and child pointers are absolute positions.
    """
    n = X.shape[0]
    out = np.empty((n, roots.shape[0]))
    rows = np.arange(n)
    for t, root in enumerate(roots):
        pos = np.full(n, root, dtype=np.int64)
        active = feature[pos] != LEAF
        while active.any():
            p = pos[active]
            go_left = X[rows[active], feature[p]] <= threshold[p]
            pos[active] = np.where(go_left, left[p], right[p])
            active = feature[pos] != LEAF
        out[:, t] = value[pos]
    return out


@njit(cache=True, nogil=True)
def predict_trees_numba(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    n_trees = roots.shape[0]
    out = np.empty((n, n_trees))
    for i in range(n):
        for t in range(n_trees):
            p = roots[t]
            while feature[p] != -1:
                if X[i, feature[p]] <= threshold[p]:
                    p = left[p]
                else:
                    p = right[p]
            out[i, t] = value[p]
    return out


if USE_NUMBA:
    pivot = pivot_numba
    build_tree = build_tree_numba
    predict_trees = predict_trees_numba
else:
    pivot = pivot_numpy
    build_tree = build_tree_numpy
    predict_trees = predict_trees_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
