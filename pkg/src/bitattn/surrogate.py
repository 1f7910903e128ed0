"""Surrogate gradients for the bitwise attention block.

The hard forward pass (Heaviside spikes, XOR distances) is piecewise constant
in Q and K. For backpropagation the spike is replaced by a sigmoid and the
XOR count by a squared difference, which equals the Hamming distance on
binary vectors. ``relaxed_forward`` is the fully smooth version of the block;
``backward`` returns its gradient with respect to Q and K, and the exact
gradient of the hard block with respect to V.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import AttentionResult, bitwise_attention
from .bitcore import pack
from .errors import ShapeError
from .matrixcore import as_matrix, minmax_pretransform, minmax_stats, ordered_matmul, pretransform_scale
from .tif import TifConfig, spike_matrix


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid_grad(x):
    s = sigmoid(x)
    return s * (1.0 - s)


def mse_distance(a, b) -> float:
    """``sum((a - b)**2)``, i.e. ``d * MSE(a, b)``; equals Hamming on 0/1 vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.sum((a - b) ** 2))


def pairwise_sq_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)


@dataclass
class GradBundle:
    d_q: np.ndarray
    d_k: np.ndarray
    d_v: np.ndarray


@dataclass
class RelaxedForwardTrace:
    q_spikes: np.ndarray  # T x n x d, values in (0, 1)
    k_spikes: np.ndarray
    q_membrane: np.ndarray  # pre-reset potentials
    k_membrane: np.ndarray
    distances: np.ndarray  # n x n real distance sums
    scores: np.ndarray
    output: np.ndarray
    stats: tuple  # ((q_min, q_max), (k_min, k_max)) used by the pre-transform


def _prepare(q_f, k_f, v):
    q_f = as_matrix(q_f, "q_f")
    k_f = as_matrix(k_f, "k_f")
    v = as_matrix(v, "v")
    if q_f.shape != k_f.shape:
        raise ShapeError(f"q_f and k_f differ: {q_f.shape} vs {k_f.shape}")
    if v.shape[0] != q_f.shape[0]:
        raise ShapeError(f"v has {v.shape[0]} rows, expected {q_f.shape[0]}")
    return q_f, k_f, v


def _stats(q_f, k_f, stats):
    if stats is not None:
        return stats
    return minmax_stats(q_f), minmax_stats(k_f)


def relaxed_if(x: np.ndarray, time_steps: int, v_th: float, hardness: float):
    """IF recurrence with ``sigmoid(hardness * (H - v_th))`` in place of the step."""
    spikes = np.empty((time_steps,) + x.shape)
    h_hist = np.empty_like(spikes)
    v = np.zeros_like(x)
    for t in range(time_steps):
        h = v + x
        s = sigmoid(hardness * (h - v_th))
        v = h * (1.0 - s) + (h - v_th) * s
        spikes[t] = s
        h_hist[t] = h
    return spikes, h_hist


def relaxed_forward(q_f, k_f, v, cfg: TifConfig = TifConfig(), hardness: float = 1.0,
                    stats=None) -> RelaxedForwardTrace:
    if not hardness > 0:
        raise ValueError("hardness must be positive")
    q_f, k_f, v = _prepare(q_f, k_f, v)
    sq, sk = _stats(q_f, k_f, stats)

    xq = minmax_pretransform(q_f, cfg.norm_mode, stats=sq)
    xk = minmax_pretransform(k_f, cfg.norm_mode, stats=sk)
    q_s, q_h = relaxed_if(xq, cfg.time_steps, cfg.v_th, hardness)
    k_s, k_h = relaxed_if(xk, cfg.time_steps, cfg.v_th, hardness)
    dist = np.zeros((q_f.shape[0], k_f.shape[0]))
    for t in range(cfg.time_steps):
        dist += pairwise_sq_distance(q_s[t], k_s[t])
    scores = 1.0 / (dist + 1.0)
    return RelaxedForwardTrace(q_s, k_s, q_h, k_h, dist, scores,
                               ordered_matmul(scores, v), (sq, sk))


def hard_forward(q_f, k_f, v, cfg: TifConfig = TifConfig(), stats=None, threads: int = 1) -> AttentionResult:
    """The actual block: pre-transform, TIF, bitwise attention."""
    q_f, k_f, v = _prepare(q_f, k_f, v)
    sq, sk = _stats(q_f, k_f, stats)
    _, q_s, _ = spike_matrix(q_f, cfg, sq)
    _, k_s, _ = spike_matrix(k_f, cfg, sk)
    return bitwise_attention(pack(q_s), pack(k_s), v, threads=threads)


def _spike_grads(d_dist, q_s, k_s):
    """Gradients of ``sum_ij d_dist[i,j] * sum_t ||q_s[t,i] - k_s[t,j]||^2``."""
    row = d_dist.sum(axis=1)[:, None]
    col = d_dist.sum(axis=0)[:, None]
    g_q = np.empty_like(q_s)
    g_k = np.empty_like(k_s)
    for t in range(q_s.shape[0]):
        g_q[t] = 2.0 * (q_s[t] * row - d_dist @ k_s[t])
        g_k[t] = 2.0 * (k_s[t] * col - d_dist.T @ q_s[t])
    return g_q, g_k


def _through_membrane(g_s, h, v_th, hardness):
    """Backpropagate spike gradients through the soft-reset IF recurrence to the input."""
    g_x = np.zeros(h.shape[1:])
    g_v = np.zeros(h.shape[1:])
    for t in range(h.shape[0] - 1, -1, -1):
        ds = hardness * sigmoid_grad(hardness * (h[t] - v_th))
        g_h = g_s[t] * ds + g_v * (1.0 - v_th * ds)
        g_x += g_h
        g_v = g_h
    return g_x


def backward(q_f, k_f, v, cfg: TifConfig, upstream, hardness: float = 1.0,
             evaluate_on: str = "relaxed", stats=None) -> GradBundle:
    """Gradients of ``sum(upstream * Y)`` w.r.t. the block's float inputs.

    ``d_v`` is exact: ``A^T @ upstream`` with the hard scores. ``d_q`` and
    ``d_k`` flow through the sigmoid and squared-difference surrogates.
    With ``evaluate_on="relaxed"`` the surrogate derivatives are taken along
    the relaxed trajectory, making them the exact gradient of
    :func:`relaxed_forward`. With ``"hard"`` they are evaluated at the hard
    spikes and membranes (straight-through style). The pre-transform's
    min and max are held constant.
    """
    if evaluate_on not in ("relaxed", "hard"):
        raise ValueError(f"evaluate_on must be 'relaxed' or 'hard', got {evaluate_on!r}")
    q_f, k_f, v = _prepare(q_f, k_f, v)
    g = as_matrix(upstream, "upstream")
    if g.shape != (q_f.shape[0], v.shape[1]):
        raise ShapeError(f"upstream shape {g.shape} does not match output {(q_f.shape[0], v.shape[1])}")
    sq, sk = _stats(q_f, k_f, stats)

    _, hq_s, hq_h = spike_matrix(q_f, cfg, sq)
    _, hk_s, hk_h = spike_matrix(k_f, cfg, sk)
    hard = bitwise_attention(pack(hq_s), pack(hk_s), v)
    d_v = hard.scores.T @ g

    if evaluate_on == "relaxed":
        tr = relaxed_forward(q_f, k_f, v, cfg, hardness, stats=(sq, sk))
        q_s, k_s, q_h, k_h, scores = tr.q_spikes, tr.k_spikes, tr.q_membrane, tr.k_membrane, tr.scores
    else:
        q_s, k_s = hq_s.astype(np.float64), hk_s.astype(np.float64)
        q_h, k_h, scores = hq_h, hk_h, hard.scores

    d_scores = g @ v.T
    d_dist = -d_scores * scores**2
    g_qs, g_ks = _spike_grads(d_dist, q_s, k_s)
    d_q = _through_membrane(g_qs, q_h, cfg.v_th, hardness) * pretransform_scale(cfg.norm_mode, sq)
    d_k = _through_membrane(g_ks, k_h, cfg.v_th, hardness) * pretransform_scale(cfg.norm_mode, sk)
    return GradBundle(d_q, d_k, d_v)
