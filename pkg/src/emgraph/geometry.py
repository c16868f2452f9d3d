"""Exact metric primitives and the occlusion / neighborhood predicates.

All predicates are evaluated on squared distances where possible, with a
single square root for the cross term. Comparisons are strict: ties mean
"not occluded". Inputs are expected to be duplicate-free; no epsilon
fudging happens inside the predicates.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "distance",
    "sq_distance",
    "is_occluded",
    "occlusion_mask",
    "in_delta_neighborhood",
]


def _as_vector(p) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a 1-d point with at least one coordinate, got shape {v.shape}")
    return v


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} != {b.shape[0]}")


def sq_distance(a, b) -> float:
    """Squared Euclidean distance between two points."""
    va, vb = _as_vector(a), _as_vector(b)
    _check_dims(va, vb)
    diff = va - vb
    return float(np.dot(diff, diff))


def distance(a, b) -> float:
    """Euclidean distance between two points."""
    return float(np.sqrt(sq_distance(a, b)))


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not np.isfinite(delta) or delta >= 1.0:
        raise ValueError(f"delta must be a finite value < 1, got {delta}")
    return delta


def is_occluded(u, v, w, delta: float) -> bool:
    """Whether w falls in the occlusion region of the directed pair (u, v).

    The region is the intersection of the open ball around u of radius
    d(u, v) with the set where d^2(w, v) + 2*delta*d(u, v)*d(w, u) < d^2(u, v).
    A node inside it justifies dropping the edge (u, v). delta may be
    negative (adaptive construction); it must be < 1.
    """
    delta = _check_delta(delta)
    vu, vv, vw = _as_vector(u), _as_vector(v), _as_vector(w)
    _check_dims(vu, vv)
    _check_dims(vu, vw)
    d2_uv = sq_distance(vu, vv)
    if d2_uv == 0.0:
        raise ValueError("occlusion is undefined for u == v")
    d2_wu = sq_distance(vw, vu)
    if d2_wu >= d2_uv:
        return False
    d2_wv = sq_distance(vw, vv)
    cross = 2.0 * delta * np.sqrt(d2_uv) * np.sqrt(d2_wu)
    return bool(d2_wv + cross < d2_uv)


def occlusion_mask(u, v, ws: np.ndarray, delta: float) -> np.ndarray:
    """Vectorized `is_occluded` over the rows of `ws`. Same semantics."""
    delta = _check_delta(delta)
    vu, vv = _as_vector(u), _as_vector(v)
    _check_dims(vu, vv)
    ws = np.atleast_2d(np.asarray(ws, dtype=np.float64))
    if ws.shape[1] != vu.shape[0]:
        raise ValueError(f"dimension mismatch: {ws.shape[1]} != {vu.shape[0]}")
    d2_uv = sq_distance(vu, vv)
    if d2_uv == 0.0:
        raise ValueError("occlusion is undefined for u == v")
    d2_wu = np.einsum("ij,ij->i", ws - vu, ws - vu)
    d2_wv = np.einsum("ij,ij->i", ws - vv, ws - vv)
    cross = 2.0 * delta * np.sqrt(d2_uv) * np.sqrt(d2_wu)
    return (d2_wu < d2_uv) & (d2_wv + cross < d2_uv)


def in_delta_neighborhood(q, x, d_nn: float, delta: float) -> bool:
    """Whether x lies in the closed ball around q of radius d_nn / delta.

    d_nn is the true nearest-neighbor distance of q; delta must lie in (0, 1)
    since only that range carries the termination guarantee.
    """
    delta = float(delta)
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if d_nn < 0.0:
        raise ValueError(f"d_nn must be non-negative, got {d_nn}")
    return distance(q, x) <= d_nn / delta
