"""Proximity-graph container and shared structural utilities.

Adjacency is a list of per-node int32 id arrays, each kept sorted by
ascending (distance-to-owner, id). The sentinel id -1 marks empty slots in
the fixed-width on-disk layout and in degree-aligned (quantized) graphs;
in-memory rows hold real neighbors only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

__all__ = [
    "SENTINEL",
    "BuildMeta",
    "ProximityGraph",
    "medoid",
    "reachable_set",
    "repair_connectivity",
    "add_reverse_edges",
    "degree_stats",
]

log = logging.getLogger(__name__)

# Serialized as u32 0xFFFFFFFF; int32 -1 has the same little-endian bytes.
SENTINEL = -1

# Nominal base delta for achieved-bound reporting on adaptive-t builds,
# which carry no single build delta (see README).
DEFAULT_REPORT_DELTA = 0.05


@dataclass
class BuildMeta:
    """Build provenance: mode plus the parameters that produced the graph."""

    mode: str = "exact"  # exact | approx | quantized
    delta: float | None = None
    t: int | None = None
    L: int | None = None
    iterations: int | None = None
    seed: int | None = None
    bootstrap: str | None = None
    batch_width: int | None = None
    quant_seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def report_delta(self) -> float:
        """Base delta used in achieved-bound (delta-prime) reporting."""
        return self.delta if self.delta is not None else DEFAULT_REPORT_DELTA


class ProximityGraph:
    """Directed capped-degree adjacency structure with a designated entry."""

    def __init__(self, n: int, m_cap: int, adj: list[np.ndarray] | None = None,
                 entry: int = 0, meta: BuildMeta | None = None):
        if n < 1:
            raise ValueError("graph needs at least one node")
        if m_cap < 0:
            raise ValueError("m_cap must be >= 0 (0 = uncapped)")
        self.n = n
        self.m_cap = m_cap
        self.adj = adj if adj is not None else [np.empty(0, dtype=np.int32) for _ in range(n)]
        self.entry = entry
        self.meta = meta if meta is not None else BuildMeta()

    def neighbors(self, u: int) -> np.ndarray:
        return self.adj[u]

    def degrees(self) -> np.ndarray:
        return np.array([row.size for row in self.adj], dtype=np.int64)

    def to_matrix(self, width: int | None = None) -> np.ndarray:
        """Fixed-width adjacency (n, width) with sentinel -1 padding."""
        degs = self.degrees()
        max_deg = int(degs.max()) if self.n else 0
        if width is None:
            width = self.m_cap if self.m_cap > 0 else max_deg
        if max_deg > width:
            raise ValueError(f"width {width} smaller than max degree {max_deg}")
        mat = np.full((self.n, max(width, 1)), SENTINEL, dtype=np.int32)
        for u, row in enumerate(self.adj):
            mat[u, : row.size] = row
        return mat[:, :width] if width > 0 else mat[:, :0]

    @classmethod
    def from_matrix(cls, mat: np.ndarray, m_cap: int, entry: int,
                    meta: BuildMeta | None = None) -> "ProximityGraph":
        adj = [np.ascontiguousarray(row[row != SENTINEL], dtype=np.int32) for row in mat]
        return cls(mat.shape[0], m_cap, adj, entry, meta)

    def validate(self) -> None:
        """Raise on any violated structural invariant."""
        if not (0 <= self.entry < self.n):
            raise ValueError(f"entry {self.entry} out of range")
        for u, row in enumerate(self.adj):
            if row.size == 0:
                continue
            if row.min() < 0 or row.max() >= self.n:
                raise ValueError(f"node {u}: neighbor id out of range")
            if np.any(row == u):
                raise ValueError(f"node {u}: self-loop")
            if np.unique(row).size != row.size:
                raise ValueError(f"node {u}: duplicate neighbors")
            if self.m_cap > 0 and row.size > self.m_cap:
                raise ValueError(f"node {u}: degree {row.size} exceeds cap {self.m_cap}")


def sorted_row(dataset: Dataset, u: int, ids) -> np.ndarray:
    """Neighbor ids sorted by ascending (distance to u, id)."""
    ids = np.asarray(ids, dtype=np.int32)
    if ids.size <= 1:
        return np.ascontiguousarray(ids)
    base = dataset.data[u].astype(np.float64)
    diff = dataset.data[ids].astype(np.float64) - base
    d2 = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((ids, d2))
    return np.ascontiguousarray(ids[order])


def medoid(dataset: Dataset) -> int:
    """Id of the point nearest the coordinate-wise centroid (ties: smallest id)."""
    centroid = dataset.data.astype(np.float64).mean(axis=0)
    diff = dataset.data.astype(np.float64) - centroid
    d2 = np.einsum("ij,ij->i", diff, diff)
    return int(np.argmin(d2))


def reachable_set(graph: ProximityGraph, start: int) -> set[int]:
    """BFS closure over out-edges from start."""
    if not (0 <= start < graph.n):
        raise ValueError(f"start {start} out of range")
    seen = np.zeros(graph.n, dtype=bool)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in graph.adj[u]:
                if not seen[v]:
                    seen[v] = True
                    nxt.append(int(v))
        frontier = nxt
    return set(np.flatnonzero(seen).tolist())


def _bfs_mask(graph: ProximityGraph, start: int) -> np.ndarray:
    seen = np.zeros(graph.n, dtype=bool)
    seen[start] = True
    frontier = np.array([start], dtype=np.int64)
    while frontier.size:
        outs = np.concatenate([graph.adj[int(u)] for u in frontier]) if frontier.size else np.empty(0, np.int32)
        if outs.size == 0:
            break
        new = np.unique(outs[~seen[outs]])
        seen[new] = True
        frontier = new
    return seen


def _insert_sorted(graph: ProximityGraph, dataset: Dataset, u: int, v: int, m_cap: int) -> None:
    """Insert edge (u, v), evicting u's longest edge if at capacity."""
    row = graph.adj[u]
    if m_cap > 0 and row.size >= m_cap:
        row = row[:-1]  # rows are ascending by distance: last is longest
    graph.adj[u] = sorted_row(dataset, u, np.append(row, np.int32(v)))


def repair_connectivity(graph: ProximityGraph, dataset: Dataset, entry: int, m_cap: int,
                        max_rounds: int = 64) -> ProximityGraph:
    """Link every node unreachable from entry, in rounds, until closure.

    Each unreachable node receives an edge from its nearest currently
    reachable node; a full source evicts its longest edge. Rounds repeat
    because an eviction can orphan a previously reachable node.
    """
    data64 = dataset.data.astype(np.float64)
    for _ in range(max_rounds):
        seen = _bfs_mask(graph, entry)
        missing = np.flatnonzero(~seen)
        if missing.size == 0:
            return graph
        for x in missing:
            x = int(x)
            if seen[x]:
                continue
            reachable = np.flatnonzero(seen)
            diff = data64[reachable] - data64[x]
            d2 = np.einsum("ij,ij->i", diff, diff)
            src = int(reachable[np.lexsort((reachable, d2))[0]])
            _insert_sorted(graph, dataset, src, x, m_cap)
            # absorb everything x already reaches before linking the rest
            seen[x] = True
            stack = [x]
            while stack:
                u = stack.pop()
                for v in graph.adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(int(v))
    raise RuntimeError(f"connectivity repair did not converge in {max_rounds} rounds")


def add_reverse_edges(graph: ProximityGraph, dataset: Dataset, m_cap: int) -> ProximityGraph:
    """For each edge (u, v), insert (v, u); overflow keeps the M closest to v."""
    incoming: list[list[int]] = [[] for _ in range(graph.n)]
    for u, row in enumerate(graph.adj):
        for v in row:
            incoming[int(v)].append(u)
    for v in range(graph.n):
        if not incoming[v]:
            continue
        merged = np.union1d(graph.adj[v], np.asarray(incoming[v], dtype=np.int32))
        merged = merged[merged != v]
        row = sorted_row(dataset, v, merged)
        if m_cap > 0 and row.size > m_cap:
            row = row[:m_cap]
        graph.adj[v] = row
    return graph


def degree_stats(graph: ProximityGraph) -> dict:
    """Min/max/mean out-degree plus a degree histogram."""
    degs = graph.degrees()
    hist = {int(k): int(c) for k, c in zip(*np.unique(degs, return_counts=True))}
    return {
        "min": int(degs.min()),
        "max": int(degs.max()),
        "mean": float(degs.mean()),
        "histogram": hist,
    }
