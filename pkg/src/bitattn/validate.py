"""Self-check suite: every core invariant as a named, measured property.

Used by ``bitattn validate``. Each property reports whether it held, the
measured quantity and the tolerance it was held to. Sizes are kept small so
the whole suite runs in a few seconds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .attention import (bitwise_attention, dot_vs_hamming_separation,
                        exhaustive_separating_triple, naive_bitwise_attention)
from .bitcore import BitTimeTensor, hamming, naive_hamming, pack, padding_mask, unpack
from .costmodel import (OpCounter, count_bitwise_attention, count_float_attention, energy,
                        energy_pj_exact)
from .matrixcore import naive_reference_attention
from .surrogate import backward, hard_forward, mse_distance, relaxed_forward
from .tif import TifConfig, boundary_guard, ratio_gamma, spike_sum, tif_convert


@dataclass
class PropertyResult:
    name: str
    passed: bool
    measured: float
    tolerance: float


def _fd(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _rel(a, b, floor=1e-8):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def _corrupt_padding(bt: BitTimeTensor) -> BitTimeTensor:
    """Flip the top padding bit of the first row, going around the constructor's guard."""
    words = bt.words.copy()
    words[0, 0, -1] ^= np.uint64(1) << np.uint64(63)
    bad = object.__new__(BitTimeTensor)
    object.__setattr__(bad, "words", words)
    object.__setattr__(bad, "cols", bt.cols)
    return bad


def run_properties(seed: int = 42, threads: int = 1, sabotage: bool = False) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    out: list[PropertyResult] = []

    def record(name, measured, tol, passed):
        out.append(PropertyResult(name, bool(passed), float(measured), float(tol)))

    ts = [1, 2, 4, 8, 16, 32, 64]
    x = boundary_guard(rng.uniform(0, 1, 2000), ts)
    fails = sum(int(np.sum(spike_sum(x, T) != np.floor(T * x))) for T in ts)
    record("tif_floor_identity", fails, 0, fails == 0)

    pairs = rng.uniform(0.05, 1, (40, 2))
    worst_excess = -np.inf
    final = 0.0
    for T in [8, 16, 32, 64, 128, 256, 512, 1024]:
        for a, b in pairs:
            gamma = ratio_gamma(a, b, T)
            if gamma is None:
                continue
            bound = 1.0 / min(math.floor(T * a), math.floor(T * b))
            worst_excess = max(worst_excess, abs(gamma - 1) - bound)
            if T == 1024:
                final = max(final, abs(gamma - 1))
    record("tif_ratio_gamma_bound", worst_excess, 0, worst_excess < 0)
    record("tif_ratio_gamma_converges", final, 0.05, final < 0.05)

    mism = 0
    for _ in range(200):
        d = int(rng.integers(1, 300))
        a, b = rng.integers(0, 2, (2, d))
        mism += hamming(a, b) != naive_hamming(a, b)
    record("hamming_kernel_oracle", mism, 0, mism == 0)

    bits = rng.random((3, 5, 70)) < 0.5
    q_b = pack(bits)
    k_b = pack(rng.random((3, 5, 70)) < 0.5)
    if sabotage:
        q_b = _corrupt_padding(q_b)
    dirty = int(np.sum(q_b.words & ~padding_mask(q_b.cols) != 0))
    record("packed_padding_zero", dirty, 0, dirty == 0)

    worst_a = worst_y = 0.0
    cases = [(q_b, k_b, rng.normal(size=(5, 70)))]
    for _ in range(8):
        T, n, d = int(rng.integers(1, 5)), int(rng.integers(1, 9)), int(rng.integers(1, 100))
        cases.append((pack(rng.random((T, n, d)) < 0.5), pack(rng.random((T, n, d)) < 0.5),
                      rng.normal(size=(n, d))))
    for q, k, v in cases:
        fast = bitwise_attention(q, k, v, threads=threads)
        slow = naive_bitwise_attention(q, k, v)
        worst_a = max(worst_a, float(np.max(np.abs(fast.scores - slow.scores))))
        worst_y = max(worst_y, float(np.max(np.abs(fast.output - slow.output))))
    record("attention_oracle_scores", worst_a, 0, worst_a == 0)
    record("attention_oracle_output", worst_y, 1e-12, worst_y <= 1e-12)

    mism = 0
    for _ in range(200):
        a, b = rng.integers(0, 2, (2, int(rng.integers(1, 200))))
        mism += mse_distance(a, b) != hamming(a, b)
    record("hamming_equals_d_mse", mism, 0, mism == 0)

    bad = 0
    for _ in range(20):
        T, n, d = int(rng.integers(1, 4)), int(rng.integers(1, 7)), int(rng.integers(1, 12))
        qb, kb = rng.random((2, T, n, d)) < 0.15
        kb[:, 0] = qb[:, -1]
        r = bitwise_attention(pack(qb), pack(kb), np.ones((n, 1)), threads=threads)
        same = np.array([[np.array_equal(qb[:, i], kb[:, j]) for j in range(n)] for i in range(n)])
        bad += int(np.any(r.scores <= 0) or np.any(r.scores > 1) or np.any((r.scores == 1) != same))
    record("score_bounds", bad, 0, bad == 0)

    cfg = TifConfig(2)
    q, k, v, g = (rng.normal(size=(3, 4)) for _ in range(4))
    gb = backward(q, k, v, cfg, g)
    err_v = _rel(gb.d_v, _fd(lambda vv: np.sum(g * hard_forward(q, k, vv, cfg).output), v))
    record("grad_v_vs_hard_fd", err_v, 1e-6, err_v <= 1e-6)
    stats = relaxed_forward(q, k, v, cfg).stats
    err_q = _rel(gb.d_q, _fd(lambda qq: np.sum(g * relaxed_forward(qq, k, v, cfg, stats=stats).output), q))
    err_k = _rel(gb.d_k, _fd(lambda kk: np.sum(g * relaxed_forward(q, kk, v, cfg, stats=stats).output), k))
    record("grad_qk_vs_relaxed_fd", max(err_q, err_k), 1e-4, max(err_q, err_k) <= 1e-4)
    zero = np.mean(_fd(lambda qq: np.sum(g * hard_forward(qq, k, v, cfg).output), q) == 0)
    record("hard_forward_piecewise_constant", zero, 0.99, zero >= 0.99)

    mism = 0
    for n, d, T in [(1, 1, 1), (2, 2, 1), (3, 4, 2)]:
        oc = OpCounter()
        naive_reference_attention(*(rng.normal(size=(n, d)) for _ in range(3)), counter=oc)
        mism += oc != count_float_attention(n, d)
        oc = OpCounter()
        cfg_t = TifConfig(T)
        qq = tif_convert(rng.normal(size=(n, d)), cfg_t, counter=oc, stage="tif_q")
        kk = tif_convert(rng.normal(size=(n, d)), cfg_t, counter=oc, stage="tif_k")
        oc = oc + naive_bitwise_attention(qq, kk, rng.normal(size=(n, d))).ops
        mism += oc != count_bitwise_attention(n, d, T)
        rep = energy(oc)
        mism += rep.energy_pj != float(energy_pj_exact(rep.flops, rep.sops))
    record("cost_model_closed_form", mism, 0, mism == 0)

    demo = dot_vs_hamming_separation()
    ok = demo.separates and abs(demo.hamming1 - demo.hamming2) >= 2 and demo.score1 != demo.score2
    ok = ok and all(exhaustive_separating_triple(d) is not None for d in range(3, 7))
    record("dot_vs_hamming_separation", abs(demo.hamming1 - demo.hamming2), 2, ok)

    if sabotage:
        # the corrupted tensor must still decode to the clean bits
        record("unpack_round_trip", int(np.sum(unpack(q_b) != bits)), 0, np.array_equal(unpack(q_b), bits))
    return out


def report(seed: int = 42, threads: int = 1, sabotage: bool = False) -> dict:
    props = run_properties(seed, threads, sabotage)
    return {
        "passed": all(p.passed for p in props),
        "seed": seed,
        "sabotage": sabotage,
        "properties": [asdict(p) for p in props],
    }
