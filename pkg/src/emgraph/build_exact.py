"""Exact occlusion-pruned graph construction.

For every node, candidates are scanned in ascending (distance, id) order and
accepted unless an already-accepted closer neighbor occludes them. The
result is uncapped (header cap 0): capping would break the navigability
guarantee, which the audit below checks pair-exhaustively.

Intended for desk scale; the per-node pass is O(n log n + n * degree) and
the whole build O(n^2 log n). A warning fires above EXACT_BUILD_GUARD nodes.
"""

from __future__ import annotations

import logging

import numpy as np

from . import _kernels
from .data import Dataset
from .geometry import is_occluded, occlusion_mask
from .graph import BuildMeta, ProximityGraph, medoid

__all__ = ["select_neighbors_exact", "build_exact", "audit_exact_graph",
           "EXACT_BUILD_GUARD"]

log = logging.getLogger(__name__)

EXACT_BUILD_GUARD = 20_000


def select_neighbors_exact(u: int, dataset: Dataset, delta: float) -> list[int]:
    """Reference occlusion selection for node u (pure Python).

    Scans all other points by ascending (distance, id); a candidate is kept
    iff no already-kept neighbor occludes it at the given delta.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    data = dataset.data.astype(np.float64)
    base = data[u]
    d2 = np.einsum("ij,ij->i", data - base, data - base)
    ids = np.arange(dataset.n)
    order = np.lexsort((ids, d2))
    accepted: list[int] = []
    for v in order:
        v = int(v)
        if v == u:
            continue
        if not any(is_occluded(base, data[v], data[w], delta) for w in accepted):
            accepted.append(v)
    return accepted


def build_exact(dataset: Dataset, delta: float, chunk: int = 256) -> ProximityGraph:
    """Construct the uncapped occlusion-pruned graph over the whole dataset."""
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    dataset.require_no_duplicates()
    n = dataset.n
    if n > EXACT_BUILD_GUARD:
        log.warning("exact build on %d points is O(n^2 log n); expect a long run", n)
    data = dataset.data
    adj: list[np.ndarray] = []
    if n == 1:
        adj = [np.empty(0, dtype=np.int32)]
    else:
        for u_start in range(0, n, chunk):
            u_end = min(u_start + chunk, n)
            out_ids = np.empty((u_end - u_start, n - 1), dtype=np.int32)
            out_counts = np.empty(u_end - u_start, dtype=np.int32)
            _kernels.exact_rows_chunk(data, u_start, u_end, float(delta), out_ids, out_counts)
            for j in range(u_end - u_start):
                adj.append(out_ids[j, : out_counts[j]].copy())
    meta = BuildMeta(mode="exact", delta=float(delta))
    graph = ProximityGraph(n, 0, adj, medoid(dataset), meta)
    return graph


def audit_exact_graph(graph: ProximityGraph, dataset: Dataset, delta: float,
                      max_violations: int = 10) -> list[tuple[int, int]]:
    """Exhaustive construction-rule audit.

    For every ordered non-edge (u, v) there must be an accepted out-neighbor
    w of u occluding v; returns the (u, v) pairs violating that (empty list
    on a valid graph).
    """
    data = dataset.data.astype(np.float64)
    violations: list[tuple[int, int]] = []
    for u in range(graph.n):
        nbrs = graph.adj[u]
        nbr_set = set(int(x) for x in nbrs)
        ws = data[nbrs] if nbrs.size else np.empty((0, dataset.d))
        for v in range(graph.n):
            if v == u or v in nbr_set:
                continue
            if nbrs.size == 0 or not occlusion_mask(data[u], data[v], ws, delta).any():
                violations.append((u, v))
                if len(violations) >= max_violations:
                    return violations
    return violations
