"""Exit criteria for the package, one test per criterion.

Run ``pytest tests/test_acceptance.py -v`` to get a PASS/FAIL line per
criterion in the terminal summary.
"""

import csv
import io
import json
import math
import time
from fractions import Fraction

import numpy as np

from bitattn.attention import (bitwise_attention, dot_vs_hamming_separation,
                               exhaustive_separating_triple, naive_bitwise_attention)
from bitattn.bitcore import hamming, naive_hamming, pack
from bitattn.cli import main
from bitattn.costmodel import (OpCounter, count_bitwise_attention, count_float_attention, energy,
                               energy_pj_exact, score_stage_ratio)
from bitattn.matrixcore import naive_reference_attention
from bitattn.surrogate import backward, hard_forward, mse_distance, relaxed_forward
from bitattn.tif import TifConfig, boundary_guard, ratio_convergence, spike_sum, tif_convert
from bitattn.toytrain import SynthTask, train

SEED = 42


def fd_grad(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def max_rel_err(a, b, floor=1e-8):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def test_01_tif_floor_identity(accept):
    rng = np.random.default_rng(SEED)
    ts = [1, 2, 4, 8, 16, 32, 64]
    t0 = time.perf_counter()
    x = boundary_guard(rng.uniform(0, 1, 10_000), ts)
    failures = sum(int(np.sum(spike_sum(x, T) != np.floor(T * x).astype(int))) for T in ts)
    elapsed = time.perf_counter() - t0
    ok = accept(1, "TIF floor identity", failures == 0 and elapsed < 5,
                f"failures={failures} runtime={elapsed:.2f}s (limit 5s)")
    assert ok


def test_02_ratio_convergence(accept):
    rng = np.random.default_rng(SEED)
    pairs = rng.uniform(0.05, 1, (100, 2))
    grid = [8, 16, 32, 64, 128, 256, 512, 1024]
    devs = np.array([[math.inf if d is None else d for _, d in ratio_convergence(x, y, grid)]
                     for x, y in pairs])
    max_dev = devs.max(axis=0)
    nonincreasing = bool(np.all(max_dev[1:] <= max_dev[:-1]))
    final = float(max_dev[-1])
    # The absolute gap scales like x / (T y^2); its supremum over [0.05, 1]^2 at
    # T=1024 is about 0.37, so this bound holds only for favorable draws.
    ok = accept(2, "ratio convergence", final < 0.05 and nonincreasing,
                f"max|x/y-S(x)/S(y)| at T=1024 = {final:.4f} (< 0.05), non-increasing={nonincreasing}")
    assert ok


def test_03_kernel_oracle_equivalence(accept):
    rng = np.random.default_rng(SEED)
    mism = 0
    residues = set()
    for i in range(1000):
        d = 1 + (i % 64) + 64 * int(rng.integers(0, 16))
        residues.add(d % 64)
        a, b = rng.integers(0, 2, (2, d))
        mism += hamming(a, b) != naive_hamming(a, b)
    worst_a = worst_y = 0.0
    for _ in range(50):
        T, n, d = int(rng.integers(1, 9)), int(rng.integers(1, 33)), int(rng.integers(1, 129))
        q = pack(rng.random((T, n, d)) < 0.5)
        k = pack(rng.random((T, n, d)) < 0.5)
        v = rng.normal(size=(n, d))
        fast, slow = bitwise_attention(q, k, v), naive_bitwise_attention(q, k, v)
        worst_a = max(worst_a, float(np.max(np.abs(fast.scores - slow.scores))))
        worst_y = max(worst_y, float(np.max(np.abs(fast.output - slow.output))))
    ok = accept(3, "kernel/oracle equivalence",
                mism == 0 and len(residues) == 64 and worst_a == 0 and worst_y <= 1e-12,
                f"hamming mismatches={mism}/1000 residues={len(residues)}/64 "
                f"max|dA|={worst_a:g} max|dY|={worst_y:g} (<= 1e-12)")
    assert ok


def test_04_hamming_equals_d_mse(accept):
    rng = np.random.default_rng(SEED)
    mism = 0
    for _ in range(1000):
        d = int(rng.integers(1, 513))
        a, b = rng.integers(0, 2, (2, d))
        dist = mse_distance(a, b)
        d_times_mse = d * Fraction(int(np.sum((a - b) ** 2)), d)  # exact, no float rounding
        mism += not (dist == int(dist) and int(dist) == hamming(a, b) == d_times_mse)
    ok = accept(4, "Hamming = d x MSE on binary vectors", mism == 0, f"mismatches={mism}/1000")
    assert ok


def test_05_score_bounds_and_attainment(accept):
    rng = np.random.default_rng(SEED)
    # construction: key row j copies query row i at every time step
    qb = rng.random((4, 6, 20)) < 0.5
    kb = rng.random((4, 6, 20)) < 0.5
    kb[:, 3] = qb[:, 1]
    built = bitwise_attention(pack(qb), pack(kb), np.ones((6, 2)))
    construct_ok = built.scores[1, 3] == 1.0
    bad = 0
    hits = 0
    for _ in range(300):
        T, n, d = int(rng.integers(1, 5)), int(rng.integers(1, 9)), int(rng.integers(1, 10))
        qb, kb = rng.random((2, T, n, d)) < rng.uniform(0, 0.3)
        r = bitwise_attention(pack(qb), pack(kb), np.ones((n, 1)))
        same = np.array([[np.array_equal(qb[:, i], kb[:, j]) for j in range(n)] for i in range(n)])
        hits += int(same.sum())
        bad += int(np.any(r.scores <= 0) or np.any(r.scores > 1) or np.any((r.scores == 1) != same))
    ok = accept(5, "score bounds and attainment", construct_ok and bad == 0 and hits > 0,
                f"construction={construct_ok} violations={bad}/300 identical pairs found={hits}")
    assert ok


def test_06_gradient_checks(accept):
    rng = np.random.default_rng(SEED)
    cfg = TifConfig(2)
    q, k, v, g = (rng.normal(size=(3, 4)) for _ in range(4))
    gb = backward(q, k, v, cfg, g)
    err_v = max_rel_err(gb.d_v, fd_grad(lambda vv: np.sum(g * hard_forward(q, k, vv, cfg).output), v))
    stats = relaxed_forward(q, k, v, cfg).stats
    err_q = max_rel_err(gb.d_q, fd_grad(
        lambda qq: np.sum(g * relaxed_forward(qq, k, v, cfg, hardness=1.0, stats=stats).output), q))
    err_k = max_rel_err(gb.d_k, fd_grad(
        lambda kk: np.sum(g * relaxed_forward(q, kk, v, cfg, hardness=1.0, stats=stats).output), k))
    zeros = total = 0
    for _ in range(20):
        qq, kk, vv, gg = (rng.normal(size=(3, 4)) for _ in range(4))
        fd = fd_grad(lambda x: np.sum(gg * hard_forward(x, kk, vv, cfg).output), qq)
        zeros += int(np.sum(fd == 0))
        total += fd.size
    frac = zeros / total
    ok = accept(6, "gradient checks", err_v <= 1e-6 and max(err_q, err_k) <= 1e-4 and frac >= 0.99,
                f"dV rel={err_v:.2e} (<=1e-6) dQ rel={err_q:.2e} dK rel={err_k:.2e} (<=1e-4) "
                f"hard-FD zero fraction={frac:.4f} (>=0.99)")
    assert ok


def test_07_cost_model_consistency(accept):
    rng = np.random.default_rng(SEED)
    mism = 0
    ratios_ok = True
    shapes = [(1, 1, 1), (2, 2, 1), (3, 5, 2), (4, 7, 3), (5, 3, 8), (2, 9, 4)]
    for n, d, T in shapes:
        oc = OpCounter()
        naive_reference_attention(*(rng.normal(size=(n, d)) for _ in range(3)), counter=oc)
        mism += oc != count_float_attention(n, d)
        oc = OpCounter()
        cfg = TifConfig(T)
        qb = tif_convert(rng.normal(size=(n, d)), cfg, counter=oc, stage="tif_q")
        kb = tif_convert(rng.normal(size=(n, d)), cfg, counter=oc, stage="tif_k")
        oc = oc + naive_bitwise_attention(qb, kb, rng.normal(size=(n, d))).ops
        mism += oc != count_bitwise_attention(n, d, T)
    for n in (1, 4, 32):
        for d in (1, 16, 64):
            for T in (1, 2, 8, 16):
                ratios_ok &= score_stage_ratio(n, d, T) == T
                for oc in (count_float_attention(n, d), count_bitwise_attention(n, d, T)):
                    rep = energy(oc)
                    ratios_ok &= rep.energy_pj == float(energy_pj_exact(rep.flops, rep.sops))
                    ratios_ok &= math.isclose(rep.energy_pj, 4.6 * rep.flops + 0.9 * rep.sops, rel_tol=1e-15)
    ok = accept(7, "cost-model consistency", mism == 0 and ratios_ok,
                f"instrumented/closed-form mismatches={mism} ratio==T and energy identity={ratios_ok}")
    assert ok


def test_08_dot_vs_hamming_separation(accept):
    demo = dot_vs_hamming_separation()
    gap = abs(demo.hamming1 - demo.hamming2)
    exists = {d: exhaustive_separating_triple(d) is not None for d in range(3, 11)}
    ok = accept(8, "dot/Hamming separation",
                demo.dot1 == demo.dot2 and gap >= 2 and demo.score1 != demo.score2 and all(exists.values()),
                f"dot {demo.dot1}={demo.dot2}, hamming {demo.hamming1} vs {demo.hamming2}, "
                f"scores {demo.score1} vs {demo.score2}, exhaustive d=3..10: {all(exists.values())}")
    assert ok


def test_09_toy_learnability_and_ablation(accept):
    task = SynthTask()
    t0 = time.perf_counter()
    log8 = train(task, TifConfig(8), epochs=30, seed=SEED)
    elapsed = time.perf_counter() - t0
    acc8 = [log8.final_accuracy] + [train(task, TifConfig(8), epochs=30, seed=s).final_accuracy
                                    for s in (SEED + 1, SEED + 2)]
    acc2 = [train(task, TifConfig(2), epochs=30, seed=s).final_accuracy for s in (SEED, SEED + 1, SEED + 2)]
    ok = accept(9, "toy learnability and T ablation",
                log8.final_accuracy >= 0.90 and elapsed < 300 and np.mean(acc8) >= np.mean(acc2),
                f"T=8 acc={log8.final_accuracy:.4f} (>=0.90) in {elapsed:.0f}s (<300s); "
                f"mean acc T=8 {np.mean(acc8):.4f} vs T=2 {np.mean(acc2):.4f}")
    assert ok


def _cli(capsys, *argv):
    code = main(list(argv))
    out, _ = capsys.readouterr()
    assert code == 0
    return out


def test_10_determinism(accept, capsys):
    val = [_cli(capsys, "--threads", t, "validate", "--json", "-") for t in ("1", "1", "4")]
    tr = [_cli(capsys, "--threads", t, "train", "--T", "4", "--epochs", "2", "--seed", "7")
          for t in ("1", "1", "4")]

    def op_columns(text):
        rows = list(csv.DictReader(io.StringIO(text)))
        return [(r["impl"], r["flops"], r["sops"], r["energy_pj"]) for r in rows]

    bench = [op_columns(_cli(capsys, "--threads", t, "bench", "--n", "12", "--d", "40", "--T", "3",
                             "--reps", "3", "--seed", "7")) for t in ("1", "1", "4")]
    same_val = val[0] == val[1] == val[2] and json.loads(val[0])["passed"]
    same_tr = tr[0] == tr[1] == tr[2]
    same_bench = bench[0] == bench[1] == bench[2]
    ok = accept(10, "determinism", same_val and same_tr and same_bench,
                f"validate={same_val} train={same_tr} bench op columns={same_bench}")
    assert ok
