"""1-bit-per-dimension quantization with an unbiased distance estimator.

Vectors are centered on the dataset centroid, passed through a seeded random
rotation, and reduced to their coordinate signs. Each code carries two
scalar factors: the vector's norm and the inner product between the decoded
unit code and the true unit direction (corr), which rescales the coded inner
product into an unbiased estimate. Neighborhood codes are laid out in
fixed-width blocks of `batch_width` slots so whole groups can be estimated
at once; sentinel slots estimate to +inf.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .build_approx import DELTA_FLOOR, BuildParams, build_approx
from .data import Dataset
from .graph import SENTINEL, ProximityGraph, repair_connectivity

__all__ = [
    "QuantizationModel",
    "EncodedVector",
    "NeighborBlock",
    "PreparedQuery",
    "QuantizedIndex",
    "train",
    "encode",
    "prepare_query",
    "estimate_sq_distance",
    "estimate_block",
    "build_quantized",
]

log = logging.getLogger(__name__)


def random_rotation(d: int, seed: int) -> np.ndarray:
    """Deterministic orthogonal matrix: QR of a PCG64 Gaussian draw with the
    usual sign fix (positive R diagonal) to make the factorization unique."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


@dataclass
class QuantizationModel:
    centroid: np.ndarray       # (d,) float64
    rotation: np.ndarray       # (d, d) float64, orthogonal
    batch_width: int
    seed: int

    @property
    def d(self) -> int:
        return self.centroid.shape[0]

    @property
    def code_bytes(self) -> int:
        return (self.d + 7) // 8


@dataclass
class EncodedVector:
    code: np.ndarray    # packed sign bits, MSB-first per byte
    norm: float         # ||o - centroid||
    corr: float         # <decoded unit code, unit(o - centroid)>, in (0, 1]


@dataclass
class NeighborBlock:
    """One node's neighborhood codes: exactly M slots in batch_width groups."""

    slot_ids: np.ndarray   # (M,) int32, SENTINEL marks empty slots
    codes: np.ndarray      # (M, code_bytes) uint8
    norms: np.ndarray      # (M,) float32
    corrs: np.ndarray      # (M,) float32


@dataclass
class PreparedQuery:
    rotated: np.ndarray    # (d,) float64 rotated centered query
    norm: float            # ||q - centroid||
    unit: np.ndarray       # (d,) float64 unit direction of `rotated`


def train(dataset: Dataset, seed: int, batch_width: int = 32) -> QuantizationModel:
    """Fit the model: coordinate-mean centroid plus a seeded rotation."""
    if batch_width < 1:
        raise ValueError("batch_width must be >= 1")
    centroid = dataset.data.astype(np.float64).mean(axis=0)
    return QuantizationModel(centroid=centroid,
                             rotation=random_rotation(dataset.d, seed),
                             batch_width=batch_width, seed=seed)


def _decode_units(codes: np.ndarray, d: int) -> np.ndarray:
    """Unpack sign bits into rows of +-1/sqrt(d)."""
    bits = np.unpackbits(codes, axis=-1, count=d)
    return (2.0 * bits - 1.0) / np.sqrt(d)


def encode(model: QuantizationModel, o) -> EncodedVector:
    """Encode one vector: sign bits of the rotated centered direction."""
    o = np.asarray(o, dtype=np.float64).ravel()
    if o.shape[0] != model.d:
        raise ValueError(f"dimension mismatch: {o.shape[0]} != {model.d}")
    centered = o - model.centroid
    norm = float(np.sqrt(np.dot(centered, centered)))
    if norm == 0.0:
        return EncodedVector(code=np.zeros(model.code_bytes, dtype=np.uint8),
                             norm=0.0, corr=1.0)
    rotated = model.rotation @ centered
    unit = rotated / np.sqrt(np.dot(rotated, rotated))
    bits = (rotated > 0.0).astype(np.uint8)
    code = np.packbits(bits)
    decoded = (2.0 * bits - 1.0) / np.sqrt(model.d)
    corr = float(np.dot(decoded, unit))
    if corr <= 0.0:   # decoded code orthogonal to the vector; probability ~0
        corr = 1.0 / np.sqrt(model.d)
    return EncodedVector(code=code, norm=norm, corr=corr)


def prepare_query(model: QuantizationModel, q) -> PreparedQuery:
    q = np.asarray(q, dtype=np.float64).ravel()
    if q.shape[0] != model.d:
        raise ValueError(f"dimension mismatch: {q.shape[0]} != {model.d}")
    centered = q - model.centroid
    norm = float(np.sqrt(np.dot(centered, centered)))
    rotated = model.rotation @ centered
    rnorm = np.sqrt(np.dot(rotated, rotated))
    unit = rotated / rnorm if rnorm > 0.0 else np.zeros_like(rotated)
    return PreparedQuery(rotated=rotated, norm=norm, unit=unit)


def estimate_sq_distance(model: QuantizationModel, prep: PreparedQuery,
                         enc: EncodedVector) -> float:
    """Estimated squared distance between the prepared query and a coded vector.

    The coded inner product <decoded, unit_q> divided by corr estimates
    <unit_o, unit_q>; the law of cosines then rebuilds the squared distance,
    clamped at zero.
    """
    decoded = _decode_units(enc.code, model.d)
    ip = float(np.dot(decoded, prep.unit)) / enc.corr
    est = enc.norm * enc.norm + prep.norm * prep.norm - 2.0 * enc.norm * prep.norm * ip
    return max(est, 0.0)


def estimate_block(model: QuantizationModel, prep: PreparedQuery,
                   block: NeighborBlock) -> np.ndarray:
    """Per-slot squared-distance estimates for a whole neighborhood block.

    Slots are processed one batch_width group at a time; results match the
    scalar estimator elementwise, with +inf in sentinel slots.
    """
    m = block.slot_ids.shape[0]
    if m % model.batch_width != 0:
        raise ValueError(f"block of {m} slots is not a multiple of batch width {model.batch_width}")
    out = np.empty(m, dtype=np.float64)
    b = model.batch_width
    for g in range(0, m, b):
        decoded = _decode_units(block.codes[g:g + b], model.d)
        ips = decoded @ prep.unit / block.corrs[g:g + b].astype(np.float64)
        norms = block.norms[g:g + b].astype(np.float64)
        est = norms * norms + prep.norm * prep.norm - 2.0 * norms * prep.norm * ips
        out[g:g + b] = np.maximum(est, 0.0)
    out[block.slot_ids == SENTINEL] = np.inf
    return out


class QuantizedIndex:
    """Degree-aligned graph whose neighborhoods carry 1-bit code blocks."""

    def __init__(self, graph: ProximityGraph, model: QuantizationModel,
                 slots: np.ndarray, codes: np.ndarray, norms: np.ndarray,
                 corrs: np.ndarray):
        self.graph = graph
        self.model = model
        self.slots = slots      # (n, M) int32 with SENTINEL padding
        self.codes = codes      # (n, M, code_bytes) uint8
        self.norms = norms      # (n, M) float32
        self.corrs = corrs      # (n, M) float32

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m_cap(self) -> int:
        return self.graph.m_cap

    @property
    def entry(self) -> int:
        return self.graph.entry

    def block(self, u: int) -> NeighborBlock:
        return NeighborBlock(slot_ids=self.slots[u], codes=self.codes[u],
                             norms=self.norms[u], corrs=self.corrs[u])

    def validate(self) -> None:
        self.graph.validate()
        m = self.graph.m_cap
        if self.slots.shape != (self.n, m):
            raise ValueError("slot matrix shape mismatch")
        degs = self.graph.degrees()
        for u in range(self.n):
            row = self.slots[u]
            real = row[row != SENTINEL]
            if real.size != degs[u] or not np.array_equal(real, self.graph.adj[u]):
                raise ValueError(f"node {u}: slots disagree with adjacency")
            if np.any(row[degs[u]:] != SENTINEL):
                raise ValueError(f"node {u}: sentinel slots must trail real ones")


def _encode_all(model: QuantizationModel, data: np.ndarray):
    """Vectorized encode() over every dataset row."""
    d = model.d
    centered = data.astype(np.float64) - model.centroid
    norms = np.sqrt(np.einsum("ij,ij->i", centered, centered))
    rotated = centered @ model.rotation.T
    rnorms = np.sqrt(np.einsum("ij,ij->i", rotated, rotated))
    safe = np.where(rnorms > 0.0, rnorms, 1.0)
    units = rotated / safe[:, None]
    bits = (rotated > 0.0).astype(np.uint8)
    corrs = np.abs(units).sum(axis=1) / np.sqrt(d)
    corrs = np.where(norms > 0.0, corrs, 1.0)
    corrs = np.where(corrs > 0.0, corrs, 1.0 / np.sqrt(d))
    codes = np.packbits(bits, axis=1)
    return codes, norms.astype(np.float32), corrs.astype(np.float32)


def build_quantized(dataset: Dataset, params: BuildParams, seed: int = 0,
                    batch_width: int = 32,
                    threads: int | None = None) -> QuantizedIndex:
    """Quantized build: approximate construction, then a degree-alignment
    pass (once global connectivity exists), a final repair that reuses the
    freed slots, and neighborhood encoding. Full-precision vectors stay with
    the caller for exact probing."""
    if params.m_cap % batch_width != 0:
        raise ValueError(f"m_cap {params.m_cap} must be a multiple of batch width {batch_width}")
    graph = build_approx(dataset, params, threads=threads)
    data = dataset.data
    mat = graph.to_matrix(params.m_cap)
    deg = graph.degrees().astype(np.int32)
    slots, counts = _kernels.align_pass(data, mat, deg, graph.entry,
                                        params.big_l, params.t, DELTA_FLOOR,
                                        params.m_cap)
    graph.adj = [slots[u, : counts[u]].copy() for u in range(graph.n)]
    repair_connectivity(graph, dataset, graph.entry, params.m_cap)
    graph.meta.mode = "quantized"
    graph.meta.batch_width = batch_width
    graph.meta.quant_seed = seed

    model = train(dataset, seed, batch_width)
    all_codes, all_norms, all_corrs = _encode_all(model, data)
    n, m = graph.n, params.m_cap
    slots = graph.to_matrix(m)
    gather = np.where(slots == SENTINEL, 0, slots)
    codes = all_codes[gather]
    norms = np.where(slots == SENTINEL, np.float32(0.0), all_norms[gather])
    corrs = np.where(slots == SENTINEL, np.float32(1.0), all_corrs[gather])
    index = QuantizedIndex(graph, model, slots, codes, norms, corrs)
    index.validate()
    return index
