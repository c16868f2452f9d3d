"""Brute-force oracle, quality metrics, and the benchmark loop.

Recall is tie-aware: the truth set is expanded with every id whose distance
equals the k-th true distance (within the stored ground-truth width), so
equal-distance swaps are not penalized. Relative distance error is the
rank-aligned mean of (returned - true) / true over all queries and ranks;
queries whose true top-k contains a zero distance are excluded and counted.
Timing is averaged over `repeats` passes of the full single-threaded query
loop; quality metrics come from the (deterministic) first pass.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, GroundTruth
from .graph import ProximityGraph
from .quantize import QuantizedIndex
from .search import SearchReport, error_bounded_search
from .search_quantized import probing_search

__all__ = [
    "brute_force_knn",
    "brute_force_knn_batch",
    "recall",
    "relative_distance_error",
    "BenchmarkRow",
    "run_benchmark",
    "rows_to_csv",
    "rows_to_json",
]


def brute_force_knn(dataset: Dataset, q, k: int) -> list[tuple[int, float]]:
    """Exact top-k by full scan; ties broken by smaller id."""
    if not (1 <= k <= dataset.n):
        raise ValueError(f"need 1 <= k <= n, got k={k} n={dataset.n}")
    q64 = np.asarray(q, dtype=np.float64).ravel()
    diff = dataset.data.astype(np.float64) - q64
    d2 = np.einsum("ij,ij->i", diff, diff)
    ids = np.arange(dataset.n)
    order = np.lexsort((ids, d2))[:k]
    return [(int(i), float(np.sqrt(d2[i]))) for i in order]


def brute_force_knn_batch(dataset: Dataset, queries: np.ndarray, k: int,
                          chunk: int = 256) -> GroundTruth:
    """Vectorized exact top-k for a query matrix."""
    if not (1 <= k <= dataset.n):
        raise ValueError(f"need 1 <= k <= n, got k={k} n={dataset.n}")
    data = dataset.data.astype(np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    sq_base = np.einsum("ij,ij->i", data, data)
    out_ids = np.empty((queries.shape[0], k), dtype=np.int32)
    out_d = np.empty((queries.shape[0], k), dtype=np.float32)
    ids = np.arange(dataset.n)
    for lo in range(0, queries.shape[0], chunk):
        hi = min(lo + chunk, queries.shape[0])
        block = queries[lo:hi]
        d2 = sq_base[None, :] + np.einsum("ij,ij->i", block, block)[:, None] - 2.0 * (block @ data.T)
        np.clip(d2, 0.0, None, out=d2)
        for r in range(hi - lo):
            order = np.lexsort((ids, d2[r]))[:k]
            out_ids[lo + r] = order
            out_d[lo + r] = np.sqrt(d2[r, order])
    return GroundTruth(ids=out_ids, distances=out_d)


def recall(result_ids, truth_ids, k: int, truth_dists=None) -> float:
    """|result[:k] ∩ truth| / k with tie expansion of the truth set.

    When truth distances are available, every stored id tied with the k-th
    true distance joins the truth set (expansion is limited to the stored
    ground-truth width).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    truth_ids = np.asarray(truth_ids).ravel()
    truth = set(int(i) for i in truth_ids[:k])
    if truth_dists is not None:
        truth_dists = np.asarray(truth_dists).ravel()
        kth = truth_dists[min(k, truth_dists.size) - 1]
        truth.update(int(i) for i in truth_ids[truth_dists == kth])
    hits = sum(1 for i in list(result_ids)[:k] if int(i) in truth)
    return hits / k


def relative_distance_error(result_dists, truth_dists) -> float:
    """Rank-aligned mean of (returned - true) / true distance."""
    r = np.asarray(result_dists, dtype=np.float64).ravel()
    t = np.asarray(truth_dists, dtype=np.float64).ravel()[: r.size]
    if r.size != t.size:
        raise ValueError("result and truth distance lists differ in length")
    if np.any(t <= 0.0):
        raise ValueError("truth distances must be positive (exclude in-dataset queries)")
    return float(np.mean((r - t) / t))


@dataclass
class BenchmarkRow:
    """One (k, alpha) evaluation record over a query set."""

    index_mode: str
    k: int
    alpha: float
    n_queries: int
    n_excluded: int          # queries skipped by the distance-error metric
    recall: float
    rel_dist_err: float
    mean_dist_comps: float
    mean_est_comps: float
    mean_hops: float
    mean_final_l: float
    local_opt_rate: float
    mean_delta_prime: float
    seconds_per_query: float

    def to_dict(self) -> dict:
        return asdict(self)


def _searcher(index, dataset):
    if isinstance(index, QuantizedIndex):
        return lambda q, k, alpha: probing_search(index, dataset, q, k, alpha), index.graph.meta.mode
    if isinstance(index, ProximityGraph):
        return lambda q, k, alpha: error_bounded_search(index, dataset, q, index.entry, k, alpha), index.meta.mode
    raise TypeError(f"unsupported index type {type(index)!r}")


def run_benchmark(index, dataset: Dataset, queries: np.ndarray, gt: GroundTruth,
                  alphas, ks, repeats: int = 5) -> list[BenchmarkRow]:
    """Evaluate every (k, alpha) setting over the query set, single-threaded."""
    search, mode = _searcher(index, dataset)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float32))
    nq = queries.shape[0]
    if gt.n_queries != nq:
        raise ValueError(f"ground truth covers {gt.n_queries} queries, got {nq}")
    rows: list[BenchmarkRow] = []
    for k in ks:
        if k > gt.k_max:
            raise ValueError(f"k={k} exceeds ground-truth width {gt.k_max}")
        for alpha in alphas:
            reports: list[SearchReport] = [search(queries[i], k, alpha) for i in range(nq)]
            recalls, errs, dprimes = [], [], []
            excluded = 0
            for i, rep in enumerate(reports):
                t_ids = gt.ids[i]
                t_d = gt.distances[i] if gt.distances is not None else None
                recalls.append(recall(rep.ids, t_ids, k, t_d))
                if t_d is not None:
                    tk = np.asarray(t_d, dtype=np.float64)[:k]
                    if np.any(tk <= 0.0) or len(rep.distances) < k:
                        excluded += 1
                    else:
                        errs.append(relative_distance_error(rep.distances, tk))
                if rep.delta_prime is not None and np.isfinite(rep.delta_prime):
                    dprimes.append(rep.delta_prime)
            elapsed = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                for i in range(nq):
                    search(queries[i], k, alpha)
                elapsed.append((time.perf_counter() - t0) / nq)
            rows.append(BenchmarkRow(
                index_mode=mode,
                k=int(k),
                alpha=float(alpha),
                n_queries=nq,
                n_excluded=excluded,
                recall=float(np.mean(recalls)),
                rel_dist_err=float(np.mean(errs)) if errs else 0.0,
                mean_dist_comps=float(np.mean([r.dist_computations for r in reports])),
                mean_est_comps=float(np.mean([r.est_computations for r in reports])),
                mean_hops=float(np.mean([r.hops for r in reports])),
                mean_final_l=float(np.mean([r.final_l for r in reports])),
                local_opt_rate=float(np.mean([r.local_opt is not None for r in reports])),
                mean_delta_prime=float(np.mean(dprimes)) if dprimes else float("nan"),
                seconds_per_query=float(np.mean(elapsed)),
            ))
    return rows


def rows_to_csv(rows: list[BenchmarkRow], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(BenchmarkRow.__dataclass_fields__))
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_dict())


def rows_to_json(rows: list[BenchmarkRow], path) -> None:
    with open(path, "w") as f:
        json.dump([row.to_dict() for row in rows], f, indent=2)
        f.write("\n")
