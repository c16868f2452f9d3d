"""Probing top-k search over a quantized index.

Navigation runs on batch-estimated distances; exact distances are computed
only when the exact frontier stops improving and an estimated candidate
looks better ("probing"), or when the exact frontier is empty. Results
always carry exact distances. A test hook can replace the estimator with
exact distances, which makes the traversal comparable to the unquantized
error-bounded search on the same topology.
"""

from __future__ import annotations

import math

import numpy as np

from .data import Dataset
from .graph import SENTINEL
from .quantize import QuantizedIndex, estimate_block, prepare_query
from .search import CandidateList, SearchReport, _dist_to, _dists_to, _query64

__all__ = ["need_probing", "probing_search"]


def need_probing(u_state: tuple[int, float] | None,
                 w_state: tuple[int, float] | None,
                 d_last: float) -> bool:
    """Decide probe-vs-expand from the best unvisited exact candidate u,
    the best unprobed estimated candidate w, and the last expansion distance.

    Probe when there is nothing exact left to expand, or when u has stopped
    improving on d_last while w estimates closer than u.
    """
    if u_state is None:
        return True
    if u_state[1] > d_last and w_state is not None and w_state[1] < u_state[1]:
        return True
    return False


def probing_search(index: QuantizedIndex, dataset: Dataset, q, k: int,
                   alpha: float, exact_estimates: bool = False) -> SearchReport:
    """Error-bounded top-k search interleaving estimation and probing.

    The outer loop and alpha termination mirror the exact-distance search but
    are evaluated on the exact candidate set only. `exact_estimates=True` is
    the estimator-ablation hook: estimation computes true distances (still
    tallied as estimates).
    """
    if alpha < 1.0:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    graph = index.graph
    data = dataset.data
    q64 = _query64(q)
    prep = prepare_query(index.model, q64)

    entry = graph.entry
    d0 = _dist_to(data, entry, q64)
    c_exact = CandidateList()
    c_exact.insert(d0, entry)
    c_est = CandidateList()
    t_exact: set[int] = set()
    t_est: set[int] = set()
    exact_memo: dict[int, float] = {entry: d0}
    d_last = d0
    exact_comps = 1
    est_comps = 0
    hops = 0
    streak = 0
    max_streak = 0
    l = k
    while True:
        while True:
            pu = c_exact.first_not_in(t_exact, l)
            pw = c_est.first_not_in(t_est, l)
            if pu is None and pw is None:
                break
            u_state = (pu[1], pu[0]) if pu is not None else None
            w_state = (pw[1], pw[0]) if pw is not None else None
            if need_probing(u_state, w_state, d_last):
                wid = w_state[0]
                dw = _dist_to(data, wid, q64)
                exact_comps += 1
                exact_memo[wid] = dw
                c_exact.insert(dw, wid)
                t_est.add(wid)  # stays listed in the estimated set, marked probed
                streak += 1
                max_streak = max(max_streak, streak)
            else:
                streak = 0
                uid, du = u_state
                d_last = du
                t_exact.add(uid)
                hops += 1
                slots = index.slots[uid]
                real = slots != SENTINEL
                est_comps += int(real.sum())
                if exact_estimates:
                    ests = np.full(slots.shape[0], np.inf)
                    if real.any():
                        ests[real] = _dists_to(data, slots[real], q64)
                else:
                    ests = np.sqrt(estimate_block(index.model, prep, index.block(uid)))
                for j in np.flatnonzero(real):
                    v = int(slots[j])
                    if v in t_est or v in c_est:
                        continue
                    c_est.insert(float(ests[j]), v)
        if len(c_exact) >= l:
            if c_exact.entries[l - 1][0] >= alpha * c_exact.entries[k - 1][0]:
                terminated = "alpha-rule"
                break
            l += 1
        elif not c_exact.any_not_in(t_exact) and not c_est.any_not_in(t_est):
            terminated = "graph-exhausted"
            break
        else:
            l += 1
    top = c_exact.entries[:k]
    report = SearchReport(
        ids=[node for _, node in top],
        distances=[d for d, _ in top],
        dist_computations=exact_comps,
        hops=hops,
        final_l=l,
        terminated_by=terminated,
        est_computations=est_comps,
        probe_streak_max=max_streak,
    )
    if len(top) == k:
        best = None
        for d, node in c_exact.entries[k:]:
            if node not in t_exact:
                continue
            nbrs = graph.adj[node]
            known = [exact_memo.get(int(v)) for v in nbrs]
            if all(dv is not None and dv >= d for dv in known):
                if best is None or d > best[1]:
                    best = (node, d)
        if best is not None:
            report.local_opt = best
            r_k = top[-1][0]
            delta = graph.meta.report_delta
            report.delta_prime = (delta * best[1] / r_k) if r_k > 0.0 else math.inf
    return report
