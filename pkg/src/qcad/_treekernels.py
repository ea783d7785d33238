"""Numba kernels for fitting and querying regression trees.

Trees live in flat preallocated arrays (one row per tree) so a whole forest
is built in a single JIT call. Randomness comes from the same SplitMix64
scheme as :mod:`qcad._rng`; the advance/finalize steps are re-implemented
here because numba cannot call the Python versions. All kernels are
sequential and release the GIL, so callers may parallelise across objects
without changing results.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U64 = np.uint64
_GAMMA = _U64(0x9E3779B97F4A7C15)
_MULT1 = _U64(0xBF58476D1CE4E5B9)
_MULT2 = _U64(0x94D049BB133111EB)

def max_nodes_for(n_samples: int) -> int:
    """Node capacity for n bootstrap samples: at most 2n - 1, padded."""
    return 2 * n_samples + 1


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U64(30))) * _MULT1
    z = (z ^ (z >> _U64(27))) * _MULT2
    return z ^ (z >> _U64(31))


@njit(cache=True, nogil=True)
def mix_seed_kernel(seed, part):
    """Sub-seed derivation; must match qcad._rng.mix_seed(seed, part)."""
    return _mix64(_U64(seed) + _GAMMA * (_U64(part) + _U64(1)))


@njit(cache=True, nogil=True)
def _sort2(a, b, n, stack):
    """Sort a[:n] ascending carrying b along; iterative quicksort with
    median-of-three pivots and insertion sort below 24 elements. The
    smaller partition is pushed, bounding the stack at O(log n)."""
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n - 1
    while top >= 0:
        lo = stack[top, 0]
        hi = stack[top, 1]
        top -= 1
        while hi - lo >= 24:
            mid = (lo + hi) // 2
            if a[mid] < a[lo]:
                a[mid], a[lo] = a[lo], a[mid]
                b[mid], b[lo] = b[lo], b[mid]
            if a[hi] < a[lo]:
                a[hi], a[lo] = a[lo], a[hi]
                b[hi], b[lo] = b[lo], b[hi]
            if a[hi] < a[mid]:
                a[hi], a[mid] = a[mid], a[hi]
                b[hi], b[mid] = b[mid], b[hi]
            pivot = a[mid]
            i = lo
            j = hi
            while i <= j:
                while a[i] < pivot:
                    i += 1
                while a[j] > pivot:
                    j -= 1
                if i <= j:
                    a[i], a[j] = a[j], a[i]
                    b[i], b[j] = b[j], b[i]
                    i += 1
                    j -= 1
            if j - lo <= hi - i:
                if lo < j:
                    top += 1
                    stack[top, 0] = lo
                    stack[top, 1] = j
                lo = i
            else:
                if i < hi:
                    top += 1
                    stack[top, 0] = i
                    stack[top, 1] = hi
                hi = j
        for i in range(lo + 1, hi + 1):
            av = a[i]
            bv = b[i]
            j = i - 1
            while j >= lo and a[j] > av:
                a[j + 1] = a[j]
                b[j + 1] = b[j]
                j -= 1
            a[j + 1] = av
            b[j + 1] = bv


@njit(cache=True, nogil=True)
def _build_tree(x, y, n_f, n_s, state, feature, threshold, left, right,
                leaf_lo, leaf_hi, samples, scratch, vals, ys, stack,
                sort_stack, pool):
    """Grow one tree on a fresh bootstrap sample.

    Splits minimise the summed squared error of the children and must
    strictly improve on the parent; tie between candidate splits keeps
    the first one found (candidate-feature order, then scan order).
    Returns the number of nodes written.
    """
    n = x.shape[0]
    p = x.shape[1]
    for j in range(n):
        state = state + _GAMMA
        samples[j] = np.int64(_mix64(state) % _U64(n))
    n_nodes = 1
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    while top >= 0:
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        top -= 1
        count = hi - lo
        make_leaf = True
        if count >= n_s and count >= 2:
            ymin = y[samples[lo]]
            ymax = ymin
            s_tot = 0.0
            q_tot = 0.0
            for j in range(lo, hi):
                v = y[samples[j]]
                s_tot += v
                q_tot += v * v
                if v < ymin:
                    ymin = v
                elif v > ymax:
                    ymax = v
            if ymax > ymin:
                if n_f >= p:
                    n_cand = p
                    for t in range(p):
                        pool[t] = t
                else:
                    n_cand = n_f
                    for t in range(p):
                        pool[t] = t
                    for t in range(n_f):
                        state = state + _GAMMA
                        j = t + np.int64(_mix64(state) % _U64(p - t))
                        pool[t], pool[j] = pool[j], pool[t]
                sse_tot = q_tot - s_tot * s_tot / count
                best_sse = sse_tot
                best_feat = -1
                best_thr = 0.0
                for ci in range(n_cand):
                    f = pool[ci]
                    for j in range(count):
                        idx = samples[lo + j]
                        vals[j] = x[idx, f]
                        ys[j] = y[idx]
                    _sort2(vals, ys, count, sort_stack)
                    sl = 0.0
                    ql = 0.0
                    for i in range(1, count):
                        v = ys[i - 1]
                        sl += v
                        ql += v * v
                        lo_v = vals[i - 1]
                        hi_v = vals[i]
                        if hi_v > lo_v:
                            sr = s_tot - sl
                            qr = q_tot - ql
                            sse = (ql - sl * sl / i) + (qr - sr * sr / (count - i))
                            if sse < best_sse:
                                best_sse = sse
                                best_feat = f
                                best_thr = 0.5 * (lo_v + hi_v)
                if best_feat >= 0:
                    nl = 0
                    for j in range(lo, hi):
                        if x[samples[j], best_feat] <= best_thr:
                            scratch[nl] = samples[j]
                            nl += 1
                    nr = nl
                    for j in range(lo, hi):
                        if x[samples[j], best_feat] > best_thr:
                            scratch[nr] = samples[j]
                            nr += 1
                    for j in range(count):
                        samples[lo + j] = scratch[j]
                    lid = n_nodes
                    rid = n_nodes + 1
                    n_nodes += 2
                    feature[node] = best_feat
                    threshold[node] = best_thr
                    left[node] = lid
                    right[node] = rid
                    top += 1
                    stack[top, 0] = lid
                    stack[top, 1] = lo
                    stack[top, 2] = lo + nl
                    top += 1
                    stack[top, 0] = rid
                    stack[top, 1] = lo + nl
                    stack[top, 2] = hi
                    make_leaf = False
        if make_leaf:
            feature[node] = -1
            threshold[node] = 0.0
            left[node] = -1
            right[node] = -1
            leaf_lo[node] = lo
            leaf_hi[node] = hi
    return n_nodes


@njit(cache=True, nogil=True)
def _route_rows(x, feature, threshold, left, right, routed, routed_lo,
                routed_hi, stack, scratch):
    """Partition all training rows down a fitted tree.

    Writes row indices grouped per node into ``routed`` (stable original
    order within groups) with spans in ``routed_lo``/``routed_hi``. These
    groups, not the bootstrap copies, carry the query-time weights.
    """
    n = x.shape[0]
    for i in range(n):
        routed[i] = i
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    while top >= 0:
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        top -= 1
        routed_lo[node] = lo
        routed_hi[node] = hi
        f = feature[node]
        if f < 0:
            continue
        thr = threshold[node]
        nl = 0
        for j in range(lo, hi):
            if x[routed[j], f] <= thr:
                scratch[nl] = routed[j]
                nl += 1
        nr = nl
        for j in range(lo, hi):
            if x[routed[j], f] > thr:
                scratch[nr] = routed[j]
                nr += 1
        for j in range(hi - lo):
            routed[lo + j] = scratch[j]
        top += 1
        stack[top, 0] = left[node]
        stack[top, 1] = lo
        stack[top, 2] = lo + nl
        top += 1
        stack[top, 0] = right[node]
        stack[top, 1] = lo + nl
        stack[top, 2] = hi


@njit(cache=True, nogil=True)
def fit_forest_kernel(x, y, n_trees, n_f, n_s, seed, feature, threshold,
                      left, right, leaf_lo, leaf_hi, samples, routed,
                      routed_lo, routed_hi, node_count):
    """Fit n_trees trees; tree t draws its stream from mix_seed(seed, t)."""
    n = x.shape[0]
    max_nodes = feature.shape[1]
    scratch = np.empty(n, np.int64)
    vals = np.empty(n, np.float64)
    ys = np.empty(n, np.float64)
    stack = np.empty((max_nodes, 3), np.int64)
    sort_stack = np.empty((128, 2), np.int64)
    pool = np.empty(x.shape[1], np.int64)
    for t in range(n_trees):
        state = mix_seed_kernel(seed, t)
        node_count[t] = _build_tree(
            x, y, n_f, n_s, state, feature[t], threshold[t], left[t],
            right[t], leaf_lo[t], leaf_hi[t], samples[t], scratch, vals,
            ys, stack, sort_stack, pool,
        )
        _route_rows(x, feature[t], threshold[t], left[t], right[t],
                    routed[t], routed_lo[t], routed_hi[t], stack, scratch)


@njit(cache=True, nogil=True)
def forest_weights_kernel(feature, threshold, left, right, routed,
                          routed_lo, routed_hi, u, out):
    """Average per-tree leaf co-residence weights for query row u.

    Within a tree, every training row routed into u's leaf gets
    1 / (number of rows routed there), so each tree's weights sum to one
    and the forest average does too. Every leaf contains at least the
    source rows of its bootstrap copies, so the count is never zero.
    """
    out[:] = 0.0
    n_trees = feature.shape[0]
    for t in range(n_trees):
        node = 0
        while feature[t, node] >= 0:
            if u[feature[t, node]] <= threshold[t, node]:
                node = left[t, node]
            else:
                node = right[t, node]
        lo = routed_lo[t, node]
        hi = routed_hi[t, node]
        inv = 1.0 / (hi - lo)
        for j in range(lo, hi):
            out[routed[t, j]] += inv
    for i in range(out.shape[0]):
        out[i] /= n_trees


@njit(cache=True, nogil=True)
def weighted_quantiles_kernel(y_sorted, w_sorted, alphas, out):
    """Smallest response v with cumulative weight >= alpha, per alpha.

    alphas must be sorted ascending. Level 0 maps to the smallest
    positively weighted response; any alphas above the accumulated total
    (float shortfall near 1) map to the largest positively weighted one.
    """
    n = y_sorted.shape[0]
    n_alpha = alphas.shape[0]
    first = -1
    last = -1
    for i in range(n):
        if w_sorted[i] > 0.0:
            if first < 0:
                first = i
            last = i
    ai = 0
    while ai < n_alpha and alphas[ai] <= 0.0:
        out[ai] = y_sorted[first]
        ai += 1
    cum = 0.0
    for i in range(n):
        w = w_sorted[i]
        if w <= 0.0:
            continue
        cum += w
        while ai < n_alpha and alphas[ai] <= cum:
            out[ai] = y_sorted[i]
            ai += 1
        if ai >= n_alpha:
            break
    while ai < n_alpha:
        out[ai] = y_sorted[last]
        ai += 1
