"""Numba kernels backing the builders.

These are internal fast paths; the spec-level behavior lives in the pure
Python functions of build_exact / build_approx / search, against which
every kernel is equivalence-tested. All heaps order entries by the pair
(squared distance, id), which matches (distance, id) ordering.

The beam search here marks nodes as seen at insertion time. For a fixed
candidate width l this returns exactly the verbatim candidate semantics
(a pruned node can never be re-admitted at the same l), while skipping
redundant distance recomputation.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange, set_num_threads

SENTINEL = -1


def set_threads(n: int) -> None:
    """Cap numba's worker count (per-node work is independent either way)."""
    set_num_threads(max(1, int(n)))


@njit(cache=True, inline="always")
def _lex_lt(d1, i1, d2, i2):
    return d1 < d2 or (d1 == d2 and i1 < i2)


@njit(cache=True)
def _min_push(hd, hi, size, d, i):
    pos = size
    hd[pos] = d
    hi[pos] = i
    while pos > 0:
        parent = (pos - 1) >> 1
        if _lex_lt(hd[pos], hi[pos], hd[parent], hi[parent]):
            hd[pos], hd[parent] = hd[parent], hd[pos]
            hi[pos], hi[parent] = hi[parent], hi[pos]
            pos = parent
        else:
            break
    return size + 1


@njit(cache=True)
def _min_pop(hd, hi, size):
    last = size - 1
    hd[0], hd[last] = hd[last], hd[0]
    hi[0], hi[last] = hi[last], hi[0]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= last:
            break
        best = left
        right = left + 1
        if right < last and _lex_lt(hd[right], hi[right], hd[left], hi[left]):
            best = right
        if _lex_lt(hd[best], hi[best], hd[pos], hi[pos]):
            hd[pos], hd[best] = hd[best], hd[pos]
            hi[pos], hi[best] = hi[best], hi[pos]
            pos = best
        else:
            break
    return last


@njit(cache=True)
def _max_push(hd, hi, size, d, i):
    pos = size
    hd[pos] = d
    hi[pos] = i
    while pos > 0:
        parent = (pos - 1) >> 1
        if _lex_lt(hd[parent], hi[parent], hd[pos], hi[pos]):
            hd[pos], hd[parent] = hd[parent], hd[pos]
            hi[pos], hi[parent] = hi[parent], hi[pos]
            pos = parent
        else:
            break
    return size + 1


@njit(cache=True)
def _max_pop(hd, hi, size):
    last = size - 1
    hd[0], hd[last] = hd[last], hd[0]
    hi[0], hi[last] = hi[last], hi[0]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= last:
            break
        best = left
        right = left + 1
        if right < last and _lex_lt(hd[left], hi[left], hd[right], hi[right]):
            best = right
        if _lex_lt(hd[pos], hi[pos], hd[best], hi[best]):
            hd[pos], hd[best] = hd[best], hd[pos]
            hi[pos], hi[best] = hi[best], hi[pos]
            pos = best
        else:
            break
    return last


@njit(cache=True, inline="always")
def _sq_dist(data, i, q):
    acc = 0.0
    for c in range(data.shape[1]):
        diff = q[c] - data[i, c]
        acc += diff * diff
    return acc


@njit(cache=True)
def _beam_search(data, adj, deg, entry, q, l, out_ids, out_d2):
    """Greedy beam search; fills out arrays ascending by (d2, id), returns size."""
    n = data.shape[0]
    seen = np.zeros(n, dtype=np.uint8)
    cap = l + 1
    wd = np.empty(cap, dtype=np.float64)
    wi = np.empty(cap, dtype=np.int32)
    hd = np.empty(n + 1, dtype=np.float64)
    hi = np.empty(n + 1, dtype=np.int32)
    wsize = 0
    hsize = 0
    d0 = _sq_dist(data, entry, q)
    seen[entry] = 1
    wsize = _max_push(wd, wi, wsize, d0, entry)
    hsize = _min_push(hd, hi, hsize, d0, entry)
    while hsize > 0:
        dc = hd[0]
        c = hi[0]
        hsize = _min_pop(hd, hi, hsize)
        if wsize >= l and _lex_lt(wd[0], wi[0], dc, c):
            break
        for j in range(deg[c]):
            v = adj[c, j]
            if seen[v] != 0:
                continue
            seen[v] = 1
            dv = _sq_dist(data, v, q)
            if wsize < l or _lex_lt(dv, v, wd[0], wi[0]):
                wsize = _max_push(wd, wi, wsize, dv, v)
                if wsize > l:
                    wsize = _max_pop(wd, wi, wsize)
                hsize = _min_push(hd, hi, hsize, dv, v)
    size = wsize
    for pos in range(size - 1, -1, -1):
        out_ids[pos] = wi[0]
        out_d2[pos] = wd[0]
        wsize = _max_pop(wd, wi, wsize)
    return size


@njit(cache=True)
def _select_occlusion(data, cand_ids, cand_dists, m, t, use_fixed, fixed_delta,
                      delta_floor, cap, out_ids, out_dists):
    """Greedy occlusion filter over candidates sorted ascending by (dist, id).

    Distances are unsquared. Accepts at most `cap` neighbors (acceptance
    order is ascending distance, so the first cap accepted are the cap
    closest). Returns the accepted count.
    """
    if m <= 0:
        return 0
    rt = 1.0
    if not use_fixed:
        tt = t
        if tt > m:
            tt = m
        rt = cand_dists[tt - 1]
    count = 0
    for j in range(m):
        v = cand_ids[j]
        duv = cand_dists[j]
        if use_fixed:
            delta = fixed_delta
        else:
            delta = 1.0 - duv / rt
            if delta < delta_floor:
                delta = delta_floor
        occluded = False
        for a in range(count):
            dwu = out_dists[a]
            if dwu >= duv:
                continue
            w = out_ids[a]
            d2wv = 0.0
            for c in range(data.shape[1]):
                diff = np.float64(data[w, c]) - np.float64(data[v, c])
                d2wv += diff * diff
            if d2wv + 2.0 * delta * duv * dwu < duv * duv:
                occluded = True
                break
        if not occluded:
            out_ids[count] = v
            out_dists[count] = duv
            count += 1
            if count >= cap:
                break
    return count


@njit(cache=True, parallel=True)
def refine_iteration(data, adj, deg, entry, big_l, t, use_fixed, fixed_delta,
                     delta_floor, m_cap):
    """One Alg.-style refinement pass: per-node beam search + occlusion selection."""
    n = data.shape[0]
    new_adj = np.full((n, m_cap), SENTINEL, dtype=np.int32)
    new_deg = np.zeros(n, dtype=np.int32)
    for u in prange(n):
        cand_ids = np.empty(big_l + 1, dtype=np.int32)
        cand_d2 = np.empty(big_l + 1, dtype=np.float64)
        q = np.empty(data.shape[1], dtype=np.float64)
        for c in range(data.shape[1]):
            q[c] = data[u, c]
        size = _beam_search(data, adj, deg, entry, q, big_l, cand_ids, cand_d2)
        # drop u itself, convert to unsquared distances
        m = 0
        for j in range(size):
            if cand_ids[j] != u:
                cand_ids[m] = cand_ids[j]
                cand_d2[m] = np.sqrt(cand_d2[j])
                m += 1
        if m > big_l:
            m = big_l
        sel_ids = np.empty(m_cap, dtype=np.int32)
        sel_d = np.empty(m_cap, dtype=np.float64)
        count = _select_occlusion(data, cand_ids, cand_d2, m, t, use_fixed,
                                  fixed_delta, delta_floor, m_cap, sel_ids, sel_d)
        for j in range(count):
            new_adj[u, j] = sel_ids[j]
        new_deg[u] = count
    return new_adj, new_deg


@njit(cache=True)
def _align_one(data, cand_ids, cand_dists, m, t_default, delta_floor, big_m, out_row):
    """Degree alignment for one node: exactly big_m slots, sentinel-padded.

    Binary-searches the smallest t whose selection reaches big_m, relying on
    the (empirically monotone) growth of selection size in t; shortfalls are
    filled with the nearest unselected candidates.
    """
    sel_ids = np.empty(big_m, dtype=np.int32)
    sel_d = np.empty(big_m, dtype=np.float64)
    chosen = np.zeros(max(m, 1), dtype=np.uint8)

    count = _select_occlusion(data, cand_ids, cand_dists, m, t_default, False,
                              0.0, delta_floor, big_m, sel_ids, sel_d)
    if count < big_m and m > 0:
        hi = m
        count_hi = _select_occlusion(data, cand_ids, cand_dists, m, hi, False,
                                     0.0, delta_floor, big_m, sel_ids, sel_d)
        if count_hi >= big_m:
            lo = 1
            while lo < hi:
                mid = (lo + hi) >> 1
                c = _select_occlusion(data, cand_ids, cand_dists, m, mid, False,
                                      0.0, delta_floor, big_m, sel_ids, sel_d)
                if c >= big_m:
                    hi = mid
                else:
                    lo = mid + 1
            count = _select_occlusion(data, cand_ids, cand_dists, m, hi, False,
                                      0.0, delta_floor, big_m, sel_ids, sel_d)
        else:
            count = count_hi

    # mark accepted candidate positions so fills keep global (dist, id) order
    pos = 0
    for a in range(count):
        target = sel_ids[a]
        while pos < m and cand_ids[pos] != target:
            pos += 1
        if pos < m:
            chosen[pos] = 1
            pos += 1
    need = big_m - count
    if need > 0:
        for j in range(m):
            if need == 0:
                break
            if chosen[j] == 0:
                chosen[j] = 1
                need -= 1
    k = 0
    for j in range(m):
        if chosen[j] == 1:
            out_row[k] = cand_ids[j]
            k += 1
    for j in range(k, big_m):
        out_row[j] = SENTINEL
    return k


@njit(cache=True, parallel=True)
def align_pass(data, adj, deg, entry, big_l, t_default, delta_floor, big_m):
    """Degree-alignment pass over all nodes on the current graph."""
    n = data.shape[0]
    slots = np.full((n, big_m), SENTINEL, dtype=np.int32)
    counts = np.zeros(n, dtype=np.int32)
    for u in prange(n):
        cand_ids = np.empty(big_l + 1, dtype=np.int32)
        cand_d2 = np.empty(big_l + 1, dtype=np.float64)
        q = np.empty(data.shape[1], dtype=np.float64)
        for c in range(data.shape[1]):
            q[c] = data[u, c]
        size = _beam_search(data, adj, deg, entry, q, big_l, cand_ids, cand_d2)
        m = 0
        for j in range(size):
            if cand_ids[j] != u:
                cand_ids[m] = cand_ids[j]
                cand_d2[m] = np.sqrt(cand_d2[j])
                m += 1
        if m > big_l:
            m = big_l
        counts[u] = _align_one(data, cand_ids, cand_d2, m, t_default, delta_floor,
                               big_m, slots[u])
    return slots, counts


@njit(cache=True, parallel=True)
def exact_rows_chunk(data, u_start, u_end, delta, out_ids, out_counts):
    """Occlusion-selected neighbor rows for nodes [u_start, u_end), uncapped."""
    n = data.shape[0]
    for k in prange(u_end - u_start):
        u = u_start + k
        d2 = np.empty(n, dtype=np.float64)
        q = np.empty(data.shape[1], dtype=np.float64)
        for c in range(data.shape[1]):
            q[c] = data[u, c]
        for i in range(n):
            d2[i] = _sq_dist(data, i, q)
        d2[u] = np.inf
        order = np.argsort(d2, kind="mergesort")
        cand_ids = np.empty(n - 1, dtype=np.int32)
        cand_d = np.empty(n - 1, dtype=np.float64)
        for j in range(n - 1):
            cand_ids[j] = order[j]
            cand_d[j] = np.sqrt(d2[order[j]])
        sel_d = np.empty(n - 1, dtype=np.float64)
        out_counts[k] = _select_occlusion(data, cand_ids, cand_d, n - 1, 0, True,
                                          delta, 0.0, n - 1, out_ids[k], sel_d)


def kernel_greedy_search(data: np.ndarray, adj: np.ndarray, deg: np.ndarray,
                         entry: int, q: np.ndarray, l: int):
    """Test/driver wrapper around the beam-search kernel.

    Returns (ids, distances) ascending by (distance, id); distances unsquared.
    """
    out_ids = np.empty(l + 1, dtype=np.int32)
    out_d2 = np.empty(l + 1, dtype=np.float64)
    size = _beam_search(data, adj, deg, int(entry), np.asarray(q, dtype=np.float64),
                        int(l), out_ids, out_d2)
    return out_ids[:size].copy(), np.sqrt(out_d2[:size])
