"""Index persistence: the "DEMG" container.

Layout (all integers little-endian):

    magic   4 bytes  b"DEMG"
    version u32      currently 1
    mode    u8       0 = exact, 1 = approx, 2 = quantized
    n       u64
    d       u32      vector dimension the index was built for
    M       u32      out-degree cap (0 = uncapped)
    entry   u32
    params  u32 length + compact JSON (sorted keys; includes row_width)
    adjacency  n * row_width i32, sentinel 0xFFFFFFFF (-1) pads each row
    quantization section (mode 2 only):
        quant_seed u64, batch_width u32,
        centroid   d * f64,
        codes      n * M * ceil(d/8) u8 (packed sign bits, MSB first),
        norms      n * M f32,
        corrs      n * M f32

Codes, norms and corrs are stored verbatim; the rotation matrix is
re-derived from quant_seed at load.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .data import FormatError
from .graph import SENTINEL, BuildMeta, ProximityGraph
from .quantize import QuantizationModel, QuantizedIndex, random_rotation

__all__ = ["save_index", "load_index", "MAGIC", "FORMAT_VERSION"]

MAGIC = b"DEMG"
FORMAT_VERSION = 1

_MODE_CODES = {"exact": 0, "approx": 1, "quantized": 2}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}


def _meta_params(meta: BuildMeta, row_width: int) -> bytes:
    payload = {
        "mode": meta.mode,
        "delta": meta.delta,
        "t": meta.t,
        "L": meta.L,
        "iterations": meta.iterations,
        "seed": meta.seed,
        "bootstrap": meta.bootstrap,
        "batch_width": meta.batch_width,
        "quant_seed": meta.quant_seed,
        "row_width": row_width,
    }
    extra = {k: v for k, v in meta.extra.items() if k != "d"}  # d lives in the header
    payload.update(extra)
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _graph_dimension(graph: ProximityGraph, d: int | None) -> int:
    if d is None:
        d = graph.meta.extra.get("d")
    if d is None:
        raise ValueError("vector dimension required to serialize the graph header")
    return int(d)


def save_index(path, index, d: int | None = None) -> None:
    """Serialize a ProximityGraph or QuantizedIndex. `d` is the vector
    dimension (taken from the quantizer model when present)."""
    if isinstance(index, QuantizedIndex):
        graph = index.graph
        d = index.model.d
    elif isinstance(index, ProximityGraph):
        graph = index
        d = _graph_dimension(graph, d)
    else:
        raise TypeError(f"unsupported index type {type(index)!r}")
    mode = graph.meta.mode
    if mode not in _MODE_CODES:
        raise ValueError(f"cannot serialize graph in build state {mode!r}")
    degs = graph.degrees()
    row_width = graph.m_cap if graph.m_cap > 0 else int(degs.max())
    row_width = max(row_width, 1)
    params = _meta_params(graph.meta, row_width)
    mat = graph.to_matrix(row_width).astype("<i4")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IBQIII", FORMAT_VERSION, _MODE_CODES[mode],
                            graph.n, d, graph.m_cap, graph.entry))
        f.write(struct.pack("<I", len(params)))
        f.write(params)
        mat.tofile(f)
        if isinstance(index, QuantizedIndex):
            f.write(struct.pack("<QI", index.model.seed, index.model.batch_width))
            index.model.centroid.astype("<f8").tofile(f)
            index.codes.astype("u1").tofile(f)
            index.norms.astype("<f4").tofile(f)
            index.corrs.astype("<f4").tofile(f)


def _take(buf: memoryview, offset: int, count: int, dtype) -> tuple[np.ndarray, int]:
    dt = np.dtype(dtype)
    nbytes = count * dt.itemsize
    if offset + nbytes > len(buf):
        raise FormatError("index file truncated")
    arr = np.frombuffer(buf, dtype=dt, count=count, offset=offset)
    return arr, offset + nbytes


def load_index(path):
    """Load a DEMG file; returns a ProximityGraph or QuantizedIndex."""
    with open(path, "rb") as f:
        raw = f.read()
    buf = memoryview(raw)
    if len(raw) < 4 + struct.calcsize("<IBQIII") + 4:
        raise FormatError(f"{path}: truncated header")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    off = 4
    version, mode_code, n, d, m_cap, entry = struct.unpack_from("<IBQIII", raw, off)
    off += struct.calcsize("<IBQIII")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if mode_code not in _MODE_NAMES:
        raise FormatError(f"{path}: unknown mode byte {mode_code}")
    (plen,) = struct.unpack_from("<I", raw, off)
    off += 4
    if off + plen > len(raw):
        raise FormatError(f"{path}: truncated params block")
    try:
        params = json.loads(raw[off:off + plen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad params block: {exc}") from exc
    off += plen
    row_width = int(params.get("row_width", m_cap))
    known = {"mode", "delta", "t", "L", "iterations", "seed", "bootstrap",
             "batch_width", "quant_seed", "row_width"}
    meta = BuildMeta(
        mode=_MODE_NAMES[mode_code],
        delta=params.get("delta"),
        t=params.get("t"),
        L=params.get("L"),
        iterations=params.get("iterations"),
        seed=params.get("seed"),
        bootstrap=params.get("bootstrap"),
        batch_width=params.get("batch_width"),
        quant_seed=params.get("quant_seed"),
        extra={k: v for k, v in params.items() if k not in known},
    )
    flat, off = _take(buf, off, n * row_width, "<i4")
    mat = flat.reshape(n, row_width)
    graph = ProximityGraph.from_matrix(mat, m_cap, entry, meta)
    if mode_code != _MODE_CODES["quantized"]:
        if off != len(raw):
            raise FormatError(f"{path}: {len(raw) - off} trailing bytes")
        graph.meta.extra.setdefault("d", d)
        return graph
    quant_seed, batch_width = struct.unpack_from("<QI", raw, off)
    off += struct.calcsize("<QI")
    centroid, off = _take(buf, off, d, "<f8")
    code_bytes = (d + 7) // 8
    codes, off = _take(buf, off, n * m_cap * code_bytes, "u1")
    norms, off = _take(buf, off, n * m_cap, "<f4")
    corrs, off = _take(buf, off, n * m_cap, "<f4")
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes")
    model = QuantizationModel(centroid=centroid.astype(np.float64),
                              rotation=random_rotation(d, int(quant_seed)),
                              batch_width=int(batch_width), seed=int(quant_seed))
    index = QuantizedIndex(
        graph, model,
        slots=graph.to_matrix(m_cap),
        codes=codes.reshape(n, m_cap, code_bytes).copy(),
        norms=norms.reshape(n, m_cap).copy(),
        corrs=corrs.reshape(n, m_cap).copy(),
    )
    return index
