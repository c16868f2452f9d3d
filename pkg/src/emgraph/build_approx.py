"""Near-linear iterative construction of an approximate occlusion graph.

Each iteration rebuilds every node's out-edges from scratch: a beam search
over the previous graph supplies candidates, an adaptive occlusion rule
prunes them, and reverse-edge + connectivity passes restore navigability.
The pruning delta is edge-length dependent: short edges are held to a tight
(nearly lune-shrinking) rule while long edges are pruned aggressively,
which keeps construction local and degrees balanced.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset
from .geometry import distance, is_occluded
from .graph import (SENTINEL, BuildMeta, ProximityGraph, add_reverse_edges,
                    medoid, repair_connectivity, sorted_row)

__all__ = ["BuildParams", "DELTA_FLOOR", "bootstrap_graph", "adaptive_delta",
           "locally_select_neighbors", "align_degree", "build_approx"]

log = logging.getLogger(__name__)

# Lower clamp for the adaptive delta: keeps the occlusion inequality sane
# for extremely long candidate edges.
DELTA_FLOOR = -8.0


@dataclass
class BuildParams:
    """Knobs for the iterative builder."""

    m_cap: int = 64          # max out-degree
    big_l: int = 1000        # candidate set size per node
    t: int = 16              # neighborhood-scale rank for the adaptive delta
    iterations: int = 3
    seed: int = 0
    bootstrap: str = "exact-knn"  # exact-knn | random-regular
    fixed_delta: float | None = None  # use a constant delta instead of the adaptive rule

    def __post_init__(self):
        if self.m_cap < 1:
            raise ValueError("m_cap must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (1 <= self.t <= self.big_l):
            raise ValueError("need 1 <= t <= big_l")
        if self.bootstrap not in ("exact-knn", "random-regular"):
            raise ValueError(f"unknown bootstrap mode {self.bootstrap!r}")
        if self.fixed_delta is not None and not (self.fixed_delta < 1.0):
            raise ValueError("fixed_delta must be < 1")


def _brute_knn_rows(data: np.ndarray, m: int, chunk: int = 512) -> list[np.ndarray]:
    """True top-m neighbor rows (self excluded), ascending (distance, id)."""
    n = data.shape[0]
    m = min(m, n - 1)
    d64 = data.astype(np.float64)
    sq = np.einsum("ij,ij->i", d64, d64)
    rows: list[np.ndarray] = []
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (d64[lo:hi] @ d64.T)
        np.clip(d2, 0.0, None, out=d2)
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        part = np.argpartition(d2, m - 1, axis=1)[:, :m] if m < n else np.argsort(d2, axis=1)
        for r in range(hi - lo):
            ids = part[r]
            order = np.lexsort((ids, d2[r, ids]))
            rows.append(np.ascontiguousarray(ids[order], dtype=np.int32))
    return rows


def bootstrap_graph(dataset: Dataset, m_cap: int, mode: str, seed: int) -> ProximityGraph:
    """Initial graph: true m-NN lists, or m random distinct out-neighbors."""
    n = dataset.n
    if mode == "exact-knn":
        adj = _brute_knn_rows(dataset.data, m_cap)
    elif mode == "random-regular":
        rng = np.random.default_rng(seed)
        deg = min(m_cap, n - 1)
        adj = []
        for u in range(n):
            pick = rng.choice(n - 1, size=deg, replace=False)
            pick = np.where(pick >= u, pick + 1, pick).astype(np.int32)
            adj.append(sorted_row(dataset, u, pick))
    else:
        raise ValueError(f"unknown bootstrap mode {mode!r}")
    return ProximityGraph(n, m_cap, adj, entry=0, meta=BuildMeta(mode="bootstrap"))


def adaptive_delta(u, v, r_t_distance: float) -> float:
    """Edge-length-adaptive pruning delta: 1 - d(u, v) / r_t_distance.

    Negative for edges longer than the local scale, approaching 1 for very
    short edges.
    """
    if r_t_distance <= 0.0:
        raise ValueError("r_t_distance must be positive")
    return 1.0 - distance(u, v) / r_t_distance


def locally_select_neighbors(dataset: Dataset, u: int, candidates, t: int,
                             fixed_delta: float | None = None,
                             delta_floor: float = DELTA_FLOOR) -> list[int]:
    """Reference adaptive occlusion selection (pure Python).

    `candidates` must be sorted ascending by (distance to u, id) and exclude
    u. The t-th candidate (or the last one, if fewer) sets the local scale.
    """
    cand = [int(v) for v in candidates]
    if not cand:
        return []
    data = dataset.data.astype(np.float64)
    base = data[u]
    dists = [distance(base, data[v]) for v in cand]
    r_t = dists[min(t, len(cand)) - 1]
    accepted: list[int] = []
    acc_d: list[float] = []
    for v, duv in zip(cand, dists):
        if fixed_delta is not None:
            delta = fixed_delta
        else:
            delta = max(adaptive_delta(base, data[v], r_t), delta_floor)
        occluded = any(
            dwu < duv and is_occluded(base, data[v], data[w], delta)
            for w, dwu in zip(accepted, acc_d)
        )
        if not occluded:
            accepted.append(v)
            acc_d.append(duv)
    return accepted


def align_degree(dataset: Dataset, u: int, candidates, m_target: int,
                 t_default: int) -> list[int]:
    """Reference degree alignment: a neighbor list of exactly m_target slots.

    If the default-t selection is short, binary-search the smallest t whose
    selection reaches m_target (selection size grows with t), then top up
    with the nearest unselected candidates; missing slots become sentinels.
    """
    cand = [int(v) for v in candidates]
    m = len(cand)

    def select(t):
        return locally_select_neighbors(dataset, u, cand, t)

    sel = select(max(t_default, 1))
    if len(sel) < m_target and m > 0:
        if len(select(m)) >= m_target:
            lo, hi = 1, m
            while lo < hi:
                mid = (lo + hi) // 2
                if len(select(mid)) >= m_target:
                    hi = mid
                else:
                    lo = mid + 1
            sel = select(hi)
        else:
            sel = select(m)
    if len(sel) >= m_target:
        return sel[:m_target]
    chosen = set(sel)
    fills = [v for v in cand if v not in chosen][: m_target - len(sel)]
    keep = set(sel) | set(fills)
    row = [v for v in cand if v in keep]
    row += [SENTINEL] * (m_target - len(row))
    return row


def build_approx(dataset: Dataset, params: BuildParams,
                 threads: int | None = None) -> ProximityGraph:
    """Iterative approximate construction.

    Per iteration: per-node beam search from the medoid gathers candidates,
    adaptive occlusion selection builds the new edge set (truncated to the
    m_cap closest), then reverse edges are added and connectivity repaired.
    Deterministic for fixed inputs regardless of thread count.
    """
    dataset.require_no_duplicates()
    if threads is not None:
        _kernels.set_threads(threads)
    entry = medoid(dataset)
    graph = bootstrap_graph(dataset, params.m_cap, params.bootstrap, params.seed)
    graph.entry = entry
    data = dataset.data
    use_fixed = params.fixed_delta is not None
    fixed = float(params.fixed_delta) if use_fixed else 0.0
    for it in range(params.iterations):
        mat = graph.to_matrix(max(params.m_cap, int(graph.degrees().max())))
        deg = graph.degrees().astype(np.int32)
        new_mat, new_deg = _kernels.refine_iteration(
            data, mat, deg, entry, params.big_l, params.t, use_fixed, fixed,
            DELTA_FLOOR, params.m_cap)
        graph.adj = [new_mat[u, : new_deg[u]].copy() for u in range(graph.n)]
        graph.m_cap = params.m_cap
        add_reverse_edges(graph, dataset, params.m_cap)
        repair_connectivity(graph, dataset, entry, params.m_cap)
        log.info("iteration %d/%d: mean degree %.2f", it + 1, params.iterations,
                 graph.degrees().mean())
    graph.meta = BuildMeta(
        mode="approx",
        delta=params.fixed_delta,
        t=None if use_fixed else params.t,
        L=params.big_l,
        iterations=params.iterations,
        seed=params.seed,
        bootstrap=params.bootstrap,
    )
    return graph
