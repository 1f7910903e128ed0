"""Bitwise attention: reciprocal of summed Hamming distances, no softmax.

``A[i, j] = 1 / (sum_t hamming(Q_b[t, i], K_b[t, j]) + 1)`` and ``Y = A @ V``.
The rows of ``A`` are deliberately left unnormalized. ``V`` stays float.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .bitcore import BitTimeTensor, distance_sum, unpack
from .costmodel import OpCounter
from .errors import ShapeError
from .matrixcore import as_matrix, ordered_matmul


@dataclass
class AttentionResult:
    scores: np.ndarray  # n x n, entries in (0, 1]
    output: np.ndarray  # n x d_v
    ops: OpCounter
    distances: np.ndarray  # n x n integer distance sums


def _check(q_b: BitTimeTensor, k_b: BitTimeTensor, v) -> np.ndarray:
    if q_b.shape != k_b.shape:
        raise ShapeError(f"Q and K spike tensors differ: {q_b.shape} vs {k_b.shape}")
    v = as_matrix(v, "v")
    if v.shape[0] != q_b.rows:
        raise ShapeError(f"v has {v.shape[0]} rows, expected {q_b.rows}")
    return v


def scores_from_distances(dist: np.ndarray) -> np.ndarray:
    return 1.0 / (dist.astype(np.float64) + 1.0)


def bitwise_attention(q_b: BitTimeTensor, k_b: BitTimeTensor, v, threads: int = 1) -> AttentionResult:
    """Packed XOR/popcount forward pass."""
    v = _check(q_b, k_b, v)
    T, n, d = q_b.shape
    dist = distance_sum(q_b, k_b, threads=threads)
    scores = scores_from_distances(dist)
    out = ordered_matmul(scores, v)
    ops = OpCounter()
    ops.add("scores", ac_ops=T * n * n * d)
    ops.add("reciprocal", additions=(T + 1) * n * n, div_ops=n * n)
    ops.add("output", mac_ops=n * n * v.shape[1])
    return AttentionResult(scores, out, ops, dist)


def naive_bitwise_attention(q_b: BitTimeTensor, k_b: BitTimeTensor, v) -> AttentionResult:
    """Explicit time/row/row/bit loops, counting every operation as it happens."""
    v = _check(q_b, k_b, v)
    qb = unpack(q_b)
    kb = unpack(k_b)
    T, n, d = q_b.shape
    ops = OpCounter()

    per_step = np.zeros((T, n, n), dtype=np.int64)
    acs = 0
    for t in range(T):
        for i in range(n):
            for j in range(n):
                acc = 0
                for c in range(d):
                    acc += int(qb[t, i, c]) ^ int(kb[t, j, c])
                    acs += 1
                per_step[t, i, j] = acc
    ops.add("scores", ac_ops=acs)

    dist = np.zeros((n, n), dtype=np.int64)
    scores = np.zeros((n, n))
    adds = divs = 0
    for i in range(n):
        for j in range(n):
            s = 0
            for t in range(T):
                s += int(per_step[t, i, j])
                adds += 1
            dist[i, j] = s
            denom = s + 1
            adds += 1
            scores[i, j] = 1.0 / denom
            divs += 1
    ops.add("reciprocal", additions=adds, div_ops=divs)

    out = np.zeros((n, v.shape[1]))
    macs = 0
    for i in range(n):
        for c in range(v.shape[1]):
            acc = 0.0
            for j in range(n):
                acc += scores[i, j] * v[j, c]
                macs += 1
            out[i, c] = acc
    ops.add("output", mac_ops=macs)
    return AttentionResult(scores, out, ops, dist)


@dataclass(frozen=True)
class SeparationDemo:
    x: tuple[int, ...]
    y1: tuple[int, ...]
    y2: tuple[int, ...]
    dot1: int
    dot2: int
    hamming1: int
    hamming2: int
    score1: float
    score2: float

    @property
    def separates(self) -> bool:
        return self.dot1 == self.dot2 and self.hamming1 != self.hamming2


def _demo(x, y1, y2) -> SeparationDemo:
    x, y1, y2 = (np.asarray(a, dtype=np.int64) for a in (x, y1, y2))
    h1 = int(np.sum(x ^ y1))
    h2 = int(np.sum(x ^ y2))
    return SeparationDemo(
        tuple(x.tolist()), tuple(y1.tolist()), tuple(y2.tolist()),
        int(x @ y1), int(x @ y2), h1, h2, 1.0 / (h1 + 1), 1.0 / (h2 + 1),
    )


def dot_vs_hamming_separation() -> SeparationDemo:
    """A binary triple that dot products cannot tell apart but Hamming distance can.

    Zero bits of ``x`` contribute nothing to ``x . y``, so ``y1`` and ``y2``
    may differ freely there while scoring the same dot product.
    """
    return _demo([1, 1, 0, 0], [1, 0, 0, 0], [1, 0, 1, 1])


def find_separating_triple(d: int, rng=None, min_gap: int = 2, max_tries: int = 100_000) -> SeparationDemo:
    """Random search for ``(x, y1, y2)`` of width ``d`` with equal dot products
    and Hamming distances at least ``min_gap`` apart."""
    if d < min_gap:
        raise ValueError(f"Hamming distances of width {d} cannot differ by {min_gap}")
    rng = np.random.default_rng(rng)
    for _ in range(max_tries):
        x, y1, y2 = rng.integers(0, 2, size=(3, d))
        demo = _demo(x, y1, y2)
        if demo.separates and abs(demo.hamming1 - demo.hamming2) >= min_gap:
            return demo
    raise RuntimeError(f"no separating triple found in {max_tries} draws")


def exhaustive_separating_triple(d: int, min_gap: int = 2) -> SeparationDemo | None:
    """First separating triple in lexicographic order, or ``None`` if none exists."""
    vecs = [np.array(bits) for bits in itertools.product((0, 1), repeat=d)]
    for x in vecs:
        for y1 in vecs:
            for y2 in vecs:
                if int(x @ y1) == int(x @ y2) and abs(int(np.sum(x ^ y1)) - int(np.sum(x ^ y2))) >= min_gap:
                    return _demo(x, y1, y2)
    return None
