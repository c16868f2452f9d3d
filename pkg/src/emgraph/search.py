"""Exact-distance search routines over a proximity graph.

Three entry points: plain greedy beam search, monotonic top-1 descent, and
the adaptive error-bounded top-k search that grows its candidate width until
the frontier is alpha-far from the k-th result. The error-bounded search
certifies a local optimum at termination, which converts the graph's build
delta into a per-query achieved bound delta'.

Distance bookkeeping is verbatim: every candidate insertion costs one
distance computation, including re-insertion of a previously pruned node.
"""

from __future__ import annotations

import math
from bisect import insort
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .graph import ProximityGraph

__all__ = ["CandidateList", "SearchReport", "greedy_search", "monotonic_top1",
           "error_bounded_search"]


def _query64(q) -> np.ndarray:
    arr = np.asarray(q, dtype=np.float64).ravel()
    return arr


def _dist_to(data: np.ndarray, i: int, q64: np.ndarray) -> float:
    diff = data[i].astype(np.float64) - q64
    return float(np.sqrt(np.dot(diff, diff)))


def _dists_to(data: np.ndarray, ids, q64: np.ndarray) -> np.ndarray:
    diff = data[np.asarray(ids)].astype(np.float64) - q64
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


class CandidateList:
    """Sorted candidate pool: unique ids ascending by (distance, id)."""

    def __init__(self):
        self.entries: list[tuple[float, int]] = []
        self._ids: set[int] = set()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, node: int) -> bool:
        return node in self._ids

    def insert(self, dist: float, node: int) -> bool:
        """Insert unless the id is already present; True if inserted."""
        if node in self._ids:
            return False
        insort(self.entries, (dist, node))
        self._ids.add(node)
        return True

    def prune(self, capacity: int) -> None:
        """Keep the `capacity` best entries."""
        if len(self.entries) > capacity:
            for d, node in self.entries[capacity:]:
                self._ids.discard(node)
            del self.entries[capacity:]

    def first_not_in(self, visited: set[int], limit: int) -> tuple[float, int] | None:
        """Best entry within the top-`limit` window whose id is not in `visited`."""
        for d, node in self.entries[: min(limit, len(self.entries))]:
            if node not in visited:
                return d, node
        return None

    def any_not_in(self, visited: set[int]) -> bool:
        return any(node not in visited for _, node in self.entries)


@dataclass
class SearchReport:
    """Ranked results plus instrumentation for one query."""

    ids: list[int]
    distances: list[float]
    dist_computations: int
    hops: int
    final_l: int
    terminated_by: str  # "alpha-rule" | "graph-exhausted"
    local_opt: tuple[int, float] | None = None
    delta_prime: float | None = None
    est_computations: int = 0
    probe_streak_max: int = 0
    excluded: bool = field(default=False, repr=False)

    @property
    def results(self) -> list[tuple[int, float]]:
        return list(zip(self.ids, self.distances))


def greedy_search(graph: ProximityGraph, dataset: Dataset, q, start: int,
                  k: int, l: int) -> SearchReport:
    """Greedy beam search: expand the closest unvisited candidate in the
    top-l window, insert its unseen neighbors, prune to l; stop when the
    window is fully visited. Returns the best k found."""
    if k < 1 or l < k:
        raise ValueError(f"need 1 <= k <= l, got k={k} l={l}")
    if not (0 <= start < graph.n):
        raise ValueError(f"start {start} out of range")
    q64 = _query64(q)
    data = dataset.data
    cand = CandidateList()
    cand.insert(_dist_to(data, start, q64), start)
    comps = 1
    visited: set[int] = set()
    hops = 0
    while True:
        pick = cand.first_not_in(visited, l)
        if pick is None:
            break
        _, u = pick
        visited.add(u)
        hops += 1
        fresh = [int(v) for v in graph.adj[u] if int(v) not in visited and int(v) not in cand]
        if fresh:
            for v, dv in zip(fresh, _dists_to(data, fresh, q64)):
                cand.insert(float(dv), v)
            comps += len(fresh)
        cand.prune(l)
    top = cand.entries[:k]
    return SearchReport(
        ids=[node for _, node in top],
        distances=[d for d, _ in top],
        dist_computations=comps,
        hops=hops,
        final_l=l,
        terminated_by="graph-exhausted",
    )


def monotonic_top1(graph: ProximityGraph, dataset: Dataset, q, start: int):
    """Walk to the (distance, id)-minimal neighbor while one is strictly
    closer; stop at the first local optimum. Returns (id, distance, hops)."""
    if not (0 <= start < graph.n):
        raise ValueError(f"start {start} out of range")
    q64 = _query64(q)
    data = dataset.data
    cur = start
    d_cur = _dist_to(data, cur, q64)
    path_len = 1
    while True:
        nbrs = graph.adj[cur]
        if nbrs.size == 0:
            break
        dists = _dists_to(data, nbrs, q64)
        j = int(np.lexsort((nbrs, dists))[0])
        if dists[j] < d_cur:
            cur = int(nbrs[j])
            d_cur = float(dists[j])
            path_len += 1
        else:
            break
    return cur, d_cur, path_len


def _certify_local_optimum(graph: ProximityGraph, cand: CandidateList,
                           visited: set[int], memo: dict[int, float], k: int):
    """Largest-distance expanded candidate outside the top-k none of whose
    neighbors is closer to the query. Only expanded nodes qualify: their
    neighborhoods were fully measured during the search."""
    best = None
    for d, node in cand.entries[k:]:
        if node not in visited:
            continue
        nbr_dists = [memo[int(v)] for v in graph.adj[node]]
        if all(dv >= d for dv in nbr_dists):
            if best is None or d > best[1]:
                best = (node, d)
    return best


def error_bounded_search(graph: ProximityGraph, dataset: Dataset, q, start: int,
                         k: int, alpha: float, delta: float | None = None) -> SearchReport:
    """Adaptive top-k search: the candidate width l grows from k until the
    l-th candidate is at least alpha times as far as the k-th, so the result
    frontier provably lags the exploration frontier.

    Discovered candidates are all retained (the sorted top-(l+1) prefix is
    what the window logic reads); expansion is limited to the top-l window,
    and exhaustion means the whole reachable graph was visited.

    At termination the final candidate list is scanned for a certified local
    optimum u; when found, the achieved bound delta' = delta * d(q,u) / d(q,r_k)
    is reported (delta defaults to the graph's build delta).
    """
    if alpha < 1.0:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not (0 <= start < graph.n):
        raise ValueError(f"start {start} out of range")
    if delta is None:
        delta = graph.meta.report_delta
    q64 = _query64(q)
    data = dataset.data
    cand = CandidateList()
    d0 = _dist_to(data, start, q64)
    cand.insert(d0, start)
    memo: dict[int, float] = {start: d0}
    comps = 1
    visited: set[int] = set()
    hops = 0
    l = k
    while True:
        while True:
            pick = cand.first_not_in(visited, l)
            if pick is None:
                break
            _, u = pick
            visited.add(u)
            hops += 1
            fresh = [int(v) for v in graph.adj[u] if int(v) not in visited and int(v) not in cand]
            if fresh:
                for v, dv in zip(fresh, _dists_to(data, fresh, q64)):
                    cand.insert(float(dv), v)
                    memo[v] = float(dv)
                comps += len(fresh)
        if len(cand) >= l:
            if cand.entries[l - 1][0] >= alpha * cand.entries[k - 1][0]:
                terminated = "alpha-rule"
                break
            l += 1
        else:
            terminated = "graph-exhausted"
            break
    top = cand.entries[:k]
    report = SearchReport(
        ids=[node for _, node in top],
        distances=[d for d, _ in top],
        dist_computations=comps,
        hops=hops,
        final_l=l,
        terminated_by=terminated,
    )
    if len(top) == k:
        opt = _certify_local_optimum(graph, cand, visited, memo, k)
        if opt is not None:
            report.local_opt = opt
            r_k = top[-1][0]
            report.delta_prime = (delta * opt[1] / r_k) if r_k > 0.0 else math.inf
    return report
