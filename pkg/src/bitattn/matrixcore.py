"""Dense float matrices, projection, min-max pre-transform and softmax attention.

Float matrices are plain 2-D ``float64`` numpy arrays. Products are accumulated
in a fixed order (row-major, left to right over the shared index) so that the
vectorized path is bit-identical to a naive triple loop.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import DomainError, ShapeError


class NormMode(str, enum.Enum):
    """How a float matrix is mapped to non-negative values before spiking."""

    UNIT_RANGE = "unit"  # (x - min) / (max - min)
    PAPER_LITERAL = "literal"  # (x - min) / max
    RAW = "raw"  # no transform; input assumed already in [0, 1]


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate ``m`` as a non-empty finite 2-D matrix and return it as float64."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite entries")
    return a


def ordered_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a @ b`` accumulated over the inner index from left to right.

    Each output element is ``((0 + a[i,0]*b[0,j]) + a[i,1]*b[1,j]) + ...``,
    exactly what a scalar triple loop computes, independent of BLAS.
    """
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for k in range(a.shape[1]):
        out += a[:, k, None] * b[None, k, :]
    return out


def project(x, w) -> np.ndarray:
    x = as_matrix(x, "x")
    w = as_matrix(w, "w")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"cannot project {x.shape} by {w.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = ordered_matmul(x, w)
    if not np.all(np.isfinite(out)):
        raise DomainError("projection overflowed")
    return out


def naive_matmul(a, b) -> np.ndarray:
    """Scalar triple-loop product; the oracle for :func:`project`."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, k_dim = a.shape
    m = b.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(k_dim):
                acc += float(a[i, k]) * float(b[k, j])
            out[i, j] = acc
    return out


def minmax_stats(m: np.ndarray) -> tuple[float, float]:
    return float(m.min()), float(m.max())


def minmax_pretransform(m, mode: NormMode | str = NormMode.UNIT_RANGE,
                        stats: tuple[float, float] | None = None) -> np.ndarray:
    """Shift and scale ``m`` with its global min and max.

    ``stats`` overrides the (min, max) pair, which lets callers freeze the
    normalization while perturbing entries. A constant matrix maps to zeros
    in ``UNIT_RANGE`` mode.
    """
    m = as_matrix(m, "m")
    mode = NormMode(mode)
    if mode is NormMode.RAW:
        return m.copy()
    lo, hi = minmax_stats(m) if stats is None else stats
    if mode is NormMode.UNIT_RANGE:
        if hi == lo:
            return np.zeros_like(m)
        return (m - lo) / (hi - lo)
    if hi == 0:
        raise DomainError("literal pre-transform divides by max(m) = 0")
    return (m - lo) / hi


def pretransform_scale(mode: NormMode | str, stats: tuple[float, float]) -> float:
    """Derivative of the pre-transform output w.r.t. each input entry, stats held fixed."""
    mode = NormMode(mode)
    lo, hi = stats
    if mode is NormMode.RAW:
        return 1.0
    if mode is NormMode.UNIT_RANGE:
        return 0.0 if hi == lo else 1.0 / (hi - lo)
    return 1.0 / hi


def softmax_rows(s: np.ndarray) -> np.ndarray:
    z = s - s.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def reference_attention(q, k, v, return_scores: bool = False):
    """Scaled dot-product attention ``softmax(q k^T / sqrt(d)) v``."""
    q = as_matrix(q, "q")
    k = as_matrix(k, "k")
    v = as_matrix(v, "v")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"q and k feature dims differ: {q.shape[1]} vs {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ShapeError(f"k and v token counts differ: {k.shape[0]} vs {v.shape[0]}")
    d = q.shape[1]
    scores = softmax_rows(ordered_matmul(q, k.T) / np.sqrt(d))
    out = ordered_matmul(scores, v)
    return (out, scores) if return_scores else out


def naive_reference_attention(q, k, v, counter=None) -> np.ndarray:
    """Element-by-element softmax attention, optionally tallying ops into ``counter``."""
    q = as_matrix(q, "q")
    k = as_matrix(k, "k")
    v = as_matrix(v, "v")
    n, d = q.shape
    m = k.shape[0]
    scale = 1.0 / np.sqrt(d)
    macs = exps = divs = 0
    weights = np.zeros((n, m))
    for i in range(n):
        logits = []
        for j in range(m):
            acc = 0.0
            for c in range(d):
                acc += q[i, c] * k[j, c]
                macs += 1
            logits.append(acc * scale)
        top = max(logits)
        es = []
        for z in logits:
            es.append(float(np.exp(z - top)))
            exps += 1
        total = sum(es)
        for j in range(m):
            weights[i, j] = es[j] / total
            divs += 1
    if counter is not None:
        counter.add("scores", mac_ops=macs)
        counter.add("softmax", exp_ops=exps, div_ops=divs)
    out = np.zeros((n, v.shape[1]))
    macs = 0
    for i in range(n):
        for c in range(v.shape[1]):
            acc = 0.0
            for j in range(m):
                acc += weights[i, j] * v[j, c]
                macs += 1
            out[i, c] = acc
    if counter is not None:
        counter.add("output", mac_ops=macs)
    return out
