"""Packed binary tensors and XOR/popcount Hamming distances.

Bits are packed little-endian into 64-bit words: feature ``j`` of a row lives
in word ``j // 64`` at bit position ``j % 64``. Bits past the logical width
``d`` (padding) are always zero, so XOR over whole words never adds spurious
differences.
"""

from __future__ import annotations

import io
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

WORD_BITS = 64
DUMP_MAGIC = b"BITT"
DUMP_VERSION = 1
_HEADER = struct.Struct("<4sBIII")


def words_for(d: int) -> int:
    return -(-d // WORD_BITS)


def padding_mask(d: int) -> np.ndarray:
    """Per-word mask with ones at the valid bit positions of a width-``d`` row."""
    mask = np.full(words_for(d), np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    tail = d % WORD_BITS
    if tail:
        mask[-1] = np.uint64((1 << tail) - 1)
    return mask


@dataclass(frozen=True, eq=False)
class BitTimeTensor:
    """``T x n x d`` binary tensor stored as ``T x n x ceil(d/64)`` uint64 words."""

    words: np.ndarray
    cols: int

    def __post_init__(self):
        w = np.ascontiguousarray(self.words, dtype=np.uint64)
        if w.ndim != 3 or w.shape[2] != words_for(self.cols) or self.cols < 1:
            raise ShapeError(f"words of shape {w.shape} cannot hold rows of width {self.cols}")
        if np.any(w & ~padding_mask(self.cols)):
            raise ValueError("padding bits must be zero")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "words", w)

    @property
    def time_steps(self) -> int:
        return self.words.shape[0]

    @property
    def rows(self) -> int:
        return self.words.shape[1]

    @property
    def words_per_row(self) -> int:
        return self.words.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.time_steps, self.rows, self.cols)

    def __getitem__(self, t: int) -> np.ndarray:
        """Packed ``n x words_per_row`` slice at time step ``t``."""
        return self.words[t]

    def __eq__(self, other):
        if not isinstance(other, BitTimeTensor):
            return NotImplemented
        return self.cols == other.cols and np.array_equal(self.words, other.words)

    def permute_rows(self, perm) -> BitTimeTensor:
        return BitTimeTensor(self.words[:, np.asarray(perm)], self.cols)


def pack(bools) -> BitTimeTensor:
    b = np.asarray(bools)
    if b.ndim == 2:
        b = b[None]
    if b.ndim != 3 or 0 in b.shape:
        raise ShapeError(f"expected a non-empty T x n x d tensor, got shape {b.shape}")
    T, n, d = b.shape
    padded = np.zeros((T, n, words_for(d) * WORD_BITS), dtype=bool)
    padded[..., :d] = b.astype(bool)
    by = np.packbits(padded, axis=-1, bitorder="little")
    return BitTimeTensor(by.view("<u8").astype(np.uint64), d)


def unpack(bt: BitTimeTensor) -> np.ndarray:
    by = np.ascontiguousarray(bt.words.astype("<u8")).view(np.uint8)
    bits = np.unpackbits(by, axis=-1, bitorder="little")
    return bits[..., : bt.cols].astype(bool)


def _as_bits(a, name):
    a = np.asarray(a)
    if a.ndim != 1:
        raise ShapeError(f"{name} must be a 1-D binary row")
    if not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must be binary")
    return a.astype(bool)


def hamming(a, b) -> int:
    """Hamming distance between two binary rows via popcount of XORed words."""
    a = _as_bits(a, "a")
    b = _as_bits(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"row lengths differ: {a.size} vs {b.size}")
    pa = pack(a[None, None])[0][0]
    pb = pack(b[None, None])[0][0]
    return int(np.bitwise_count(pa ^ pb).sum())


def naive_hamming(a, b) -> int:
    """Per-bit XOR loop; the oracle for :func:`hamming`."""
    if len(a) != len(b):
        raise ShapeError("row lengths differ")
    total = 0
    for x, y in zip(a, b):
        total += int(x) ^ int(y)
    return total


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # a: (r, w), b: (n, w) packed rows -> (r, n) distances
    return np.bitwise_count(a[:, None, :] ^ b[None, :, :]).sum(axis=-1, dtype=np.int64)


def _check_pair(a: BitTimeTensor, b: BitTimeTensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"operand shapes differ: {a.shape} vs {b.shape}")


def hamming_matrix(a: BitTimeTensor, b: BitTimeTensor, t: int = 0) -> np.ndarray:
    """``D[i, j] = hamming(a[t] row i, b[t] row j)`` as an ``n x n`` int64 matrix."""
    _check_pair(a, b)
    return _pairwise(a[t], b[t])


def naive_hamming_matrix(a, b) -> np.ndarray:
    """Double loop over rows of two boolean ``n x d`` matrices."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape[1] != b.shape[1]:
        raise ShapeError("feature widths differ")
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.int64)
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = naive_hamming(a[i], b[j])
    return out


def distance_sum(a: BitTimeTensor, b: BitTimeTensor, threads: int = 1) -> np.ndarray:
    """Hamming distances summed over all time steps.

    ``threads > 1`` splits the query rows into blocks; integer results make the
    outcome independent of the split.
    """
    _check_pair(a, b)
    n = a.rows

    def block(lo, hi):
        acc = np.zeros((hi - lo, n), dtype=np.int64)
        for t in range(a.time_steps):
            acc += _pairwise(a[t][lo:hi], b[t])
        return acc

    if threads <= 1 or n < 2:
        return block(0, n)
    edges = np.linspace(0, n, min(threads, n) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(block, edges[:-1], edges[1:]))
    return np.vstack(parts)


def dump(bt: BitTimeTensor, dest) -> None:
    """Write ``bt`` as: ``BITT``, version byte, T, n, d (u32 LE), then LE u64 words."""
    payload = _HEADER.pack(DUMP_MAGIC, DUMP_VERSION, *bt.shape) + bt.words.astype("<u8").tobytes()
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "wb") as fh:
            fh.write(payload)
    else:
        dest.write(payload)


def load(src) -> BitTimeTensor:
    if isinstance(src, (str, os.PathLike)):
        with open(src, "rb") as fh:
            data = fh.read()
    elif isinstance(src, (bytes, bytearray)):
        data = bytes(src)
    else:
        data = src.read()
    if len(data) < _HEADER.size:
        raise ValueError("truncated spike tensor header")
    magic, version, T, n, d = _HEADER.unpack_from(data)
    if magic != DUMP_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != DUMP_VERSION:
        raise ValueError(f"unsupported dump version {version}")
    count = T * n * words_for(d)
    body = data[_HEADER.size:]
    if len(body) != count * 8:
        raise ValueError(f"expected {count * 8} payload bytes, got {len(body)}")
    words = np.frombuffer(body, dtype="<u8").astype(np.uint64).reshape(T, n, words_for(d))
    return BitTimeTensor(words, d)


def dumps(bt: BitTimeTensor) -> bytes:
    buf = io.BytesIO()
    dump(bt, buf)
    return buf.getvalue()
