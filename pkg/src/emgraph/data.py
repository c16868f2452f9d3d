"""Vector dataset container, fvecs/ivecs serialization and synthetic data.

File formats are the texmex benchmark containers: each record is a 32-bit
little-endian signed count D followed by D little-endian payload elements
(float32 for fvecs, int32 for ivecs). All records in a file must share D.

Synthetic generation is pinned to NumPy's PCG64 generator so datasets
reproduce exactly for a given (n, d, distribution, seed).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "GroundTruth",
    "FormatError",
    "read_fvecs",
    "write_fvecs",
    "read_ivecs",
    "write_ivecs",
    "gen_synthetic",
    "dedup",
]


class FormatError(ValueError):
    """Raised for malformed fvecs/ivecs payloads."""


@dataclass
class Dataset:
    """n row-major vectors of uniform dimension; the row index is the id."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"dataset must be a non-empty 2-d array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("dataset contains non-finite entries")
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def has_duplicates(self) -> bool:
        """True if any two rows are bitwise identical."""
        rows = self.data.view([("", self.data.dtype)] * self.d).ravel()
        return np.unique(rows).size != self.n

    def require_no_duplicates(self) -> None:
        if self.has_duplicates():
            raise ValueError("dataset contains duplicate points; dedup() before building")


@dataclass
class GroundTruth:
    """Per-query exact neighbor ids (and distances), ordered by distance."""

    ids: np.ndarray
    distances: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.ids = np.ascontiguousarray(np.asarray(self.ids, dtype=np.int32))
        if self.ids.ndim != 2 or self.ids.shape[1] < 1:
            raise ValueError(f"ground truth ids must be a 2-d array, got shape {self.ids.shape}")
        if self.distances is not None:
            self.distances = np.ascontiguousarray(np.asarray(self.distances, dtype=np.float32))
            if self.distances.shape != self.ids.shape:
                raise ValueError("ground truth distances must match the id array shape")

    @property
    def n_queries(self) -> int:
        return self.ids.shape[0]

    @property
    def k_max(self) -> int:
        return self.ids.shape[1]


def _read_records(path, dtype: np.dtype) -> np.ndarray:
    with open(path, "rb") as f:
        raw = np.fromfile(f, dtype=np.uint8)
    if raw.size == 0:
        raise FormatError(f"{path}: empty file")
    if raw.size < 4:
        raise FormatError(f"{path}: truncated header")
    d = int(raw[:4].view("<i4")[0])
    if d < 1:
        raise FormatError(f"{path}: record 0 declares non-positive dimension {d}")
    rec_bytes = 4 + 4 * d
    if raw.size % rec_bytes != 0:
        raise FormatError(f"{path}: truncated file ({raw.size} bytes, record size {rec_bytes})")
    n = raw.size // rec_bytes
    rec = raw.view([("dim", "<i4"), ("vec", dtype, d)])
    dims = rec["dim"]
    if not np.all(dims == d):
        bad = int(np.argmax(dims != d))
        raise FormatError(f"{path}: record {bad} has dimension {int(dims[bad])}, expected {d}")
    assert rec.shape[0] == n
    return np.ascontiguousarray(rec["vec"])


def read_fvecs(path) -> Dataset:
    """Load an fvecs file into a Dataset."""
    return Dataset(_read_records(path, np.dtype("<f4")))


def write_fvecs(path, dataset: Dataset | np.ndarray) -> None:
    """Write vectors in fvecs layout (bit-exact round trip with read_fvecs)."""
    arr = dataset.data if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
    n, d = arr.shape
    rec = np.empty(n, dtype=[("dim", "<i4"), ("vec", "<f4", d)])
    rec["dim"] = d
    rec["vec"] = arr
    with open(path, "wb") as f:
        rec.tofile(f)


def read_ivecs(path) -> np.ndarray:
    """Load an ivecs file as an (n, d) int32 id matrix."""
    return _read_records(path, np.dtype("<i4"))


def write_ivecs(path, ids: np.ndarray) -> None:
    """Write int32 id lists in ivecs layout."""
    arr = np.asarray(ids, dtype=np.int32)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d id array, got shape {arr.shape}")
    n, d = arr.shape
    rec = np.empty(n, dtype=[("dim", "<i4"), ("vec", "<i4", d)])
    rec["dim"] = d
    rec["vec"] = arr
    with open(path, "wb") as f:
        rec.tofile(f)


def gen_synthetic(n: int, d: int, distribution: str = "uniform", seed: int = 0, clusters: int = 16) -> Dataset:
    """Deterministic synthetic dataset (PCG64-seeded).

    distribution "uniform" samples from [0, 1]^d; "gaussian-mixture" draws
    `clusters` centers from [0, 1]^d and adds N(0, 0.05^2) noise around a
    randomly assigned center per point.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        data = rng.random((n, d), dtype=np.float64)
    elif distribution == "gaussian-mixture":
        if clusters > n:
            raise ValueError(f"clusters ({clusters}) must not exceed n ({n})")
        if clusters < 1:
            raise ValueError("clusters must be >= 1")
        centers = rng.random((clusters, d))
        labels = rng.integers(0, clusters, size=n)
        data = centers[labels] + rng.normal(0.0, 0.05, size=(n, d))
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    return Dataset(data.astype(np.float32))


def dedup(dataset: Dataset) -> Dataset:
    """Drop exact duplicate rows, keeping the first occurrence of each."""
    rows = dataset.data.view([("", dataset.data.dtype)] * dataset.d).ravel()
    _, first = np.unique(rows, return_index=True)
    keep = np.sort(first)
    return Dataset(dataset.data[keep])


def resolve_path(path) -> str:
    """Expanduser + abspath, for CLI ergonomics."""
    return os.path.abspath(os.path.expanduser(str(path)))
