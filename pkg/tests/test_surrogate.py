import numpy as np
import pytest

from bitattn.bitcore import hamming
from bitattn.errors import ShapeError
from bitattn.surrogate import (backward, hard_forward, mse_distance, relaxed_forward, sigmoid,
                               sigmoid_grad)
from bitattn.tif import TifConfig, spike_matrix


def fd_grad(f, x, h=1e-5):
    """Central differences of scalar ``f`` at every entry of ``x``."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def max_rel_err(a, b, floor=1e-8):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def test_sigmoid_values(rng):
    assert sigmoid(0.0) == 0.5
    assert sigmoid_grad(0.0) == 0.25
    x = rng.uniform(-30, 30, 1000)
    np.testing.assert_allclose(sigmoid(x) + sigmoid(-x), 1.0, atol=1e-15)
    h = 1e-5
    np.testing.assert_allclose(sigmoid_grad(x[:50]), (sigmoid(x[:50] + h) - sigmoid(x[:50] - h)) / (2 * h),
                               atol=1e-8, rtol=0)
    assert np.isfinite(sigmoid(np.array([-1e4, 1e4]))).all()


def test_mse_equals_hamming_on_binary(rng):
    for _ in range(200):
        d = int(rng.integers(1, 300))
        a, b = rng.integers(0, 2, (2, d))
        assert mse_distance(a, b) == hamming(a, b)


def _away_from_threshold(rng, shape, T, margin=0.02):
    # raw inputs whose hard membranes never come within ``margin`` of threshold
    while True:
        x = rng.uniform(0, 1, shape)
        _, _, h = spike_matrix(x, TifConfig(T, norm_mode="raw"))
        if np.min(np.abs(h - 1.0)) > margin:
            return x


def test_relaxed_spikes_approach_hard(rng):
    T = 4
    cfg = TifConfig(T, norm_mode="raw")
    q, k = (_away_from_threshold(rng, (3, 5), T) for _ in range(2))
    v = rng.normal(size=(3, 5))
    _, hard_q, _ = spike_matrix(q, cfg)
    hard = hard_forward(q, k, v, cfg)
    errs = []
    for hardness in (10.0, 100.0, 1e4):
        tr = relaxed_forward(q, k, v, cfg, hardness=hardness)
        errs.append(np.max(np.abs(tr.q_spikes - hard_q)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 1e-9
    np.testing.assert_allclose(tr.distances, hard.distances, atol=1e-9)


def test_relaxed_identical_inputs_diagonal(rng):
    q = rng.normal(size=(4, 6))
    tr = relaxed_forward(q, q.copy(), rng.normal(size=(4, 6)), TifConfig(4), hardness=1e4)
    np.testing.assert_allclose(np.diag(tr.scores), 1.0, atol=1e-9)


def _straight_relaxed(q, k, v, T, hardness):
    # independent scalar re-implementation of the relaxed block
    def norm(m):
        return (m - m.min()) / (m.max() - m.min())

    def spikes(x):
        out = np.zeros((T,) + x.shape)
        for idx in np.ndindex(x.shape):
            mem = 0.0
            for t in range(T):
                h = mem + x[idx]
                s = 1.0 / (1.0 + np.exp(-hardness * (h - 1.0)))
                mem = h - s
                out[(t,) + idx] = s
        return out

    qs, ks = spikes(norm(q)), spikes(norm(k))
    n = q.shape[0]
    a = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            a[i, j] = 1.0 / (sum(((qs[t, i] - ks[t, j]) ** 2).sum() for t in range(T)) + 1.0)
    return a, a @ v


def test_relaxed_forward_matches_straight_reimplementation(rng):
    q, k, v = (rng.normal(size=(2, 2)) for _ in range(3))
    tr = relaxed_forward(q, k, v, TifConfig(3), hardness=1.0)
    a, y = _straight_relaxed(q, k, v, 3, 1.0)
    np.testing.assert_allclose(tr.scores, a, atol=1e-12, rtol=0)
    np.testing.assert_allclose(tr.output, y, atol=1e-12, rtol=0)


def test_zero_upstream_gives_zero_grads(rng):
    q, k, v = (rng.normal(size=(3, 4)) for _ in range(3))
    gb = backward(q, k, v, TifConfig(2), np.zeros((3, 4)))
    for g in (gb.d_q, gb.d_k, gb.d_v):
        assert not g.any()


@pytest.mark.parametrize("seed", range(4))
def test_dv_matches_hard_finite_differences(seed):
    r = np.random.default_rng(seed)
    q, k, v, g = (r.normal(size=(3, 4)) for _ in range(4))
    cfg = TifConfig(2)
    gb = backward(q, k, v, cfg, g)
    fd = fd_grad(lambda vv: np.sum(g * hard_forward(q, k, vv, cfg).output), v)
    assert max_rel_err(gb.d_v, fd) <= 1e-6


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("mode", ["unit", "literal"])
def test_dq_dk_match_relaxed_finite_differences(seed, mode):
    r = np.random.default_rng(seed)
    q, k, v, g = (r.normal(size=(3, 4)) for _ in range(4))
    if mode == "literal":
        q, k = q + 3.0, k + 3.0  # keep max > 0
    cfg = TifConfig(2, norm_mode=mode)
    gb = backward(q, k, v, cfg, g)
    stats = relaxed_forward(q, k, v, cfg).stats
    loss_q = lambda qq: np.sum(g * relaxed_forward(qq, k, v, cfg, stats=stats).output)
    loss_k = lambda kk: np.sum(g * relaxed_forward(q, kk, v, cfg, stats=stats).output)
    assert max_rel_err(gb.d_q, fd_grad(loss_q, q)) <= 1e-4
    assert max_rel_err(gb.d_k, fd_grad(loss_k, k)) <= 1e-4


def test_hard_evaluation_differs_from_relaxed_gradient(rng):
    q, k, v, g = (rng.normal(size=(3, 4)) for _ in range(4))
    cfg = TifConfig(2)
    relaxed = backward(q, k, v, cfg, g)
    hard = backward(q, k, v, cfg, g, evaluate_on="hard")
    np.testing.assert_array_equal(relaxed.d_v, hard.d_v)
    assert np.isfinite(hard.d_q).all() and np.isfinite(hard.d_k).all()
    assert not np.allclose(relaxed.d_q, hard.d_q)


def test_hard_forward_is_piecewise_constant_in_q(rng):
    q, k, v, g = (rng.normal(size=(3, 4)) for _ in range(4))
    cfg = TifConfig(2)
    fd = fd_grad(lambda qq: np.sum(g * hard_forward(qq, k, v, cfg).output), q)
    assert np.mean(fd == 0) >= 0.99


def test_grads_finite_on_degenerate_inputs(rng):
    q = np.full((3, 4), 2.0)
    k = np.full((3, 4), -1.0)
    v = rng.normal(size=(3, 4))
    for mode in ("relaxed", "hard"):
        gb = backward(q, k, v, TifConfig(4), rng.normal(size=(3, 4)), evaluate_on=mode)
        for arr in (gb.d_q, gb.d_k, gb.d_v):
            assert np.isfinite(arr).all()


def test_backward_errors(rng):
    q, k, v = (rng.normal(size=(3, 4)) for _ in range(3))
    with pytest.raises(ShapeError):
        backward(q, k, v, TifConfig(2), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        backward(q, k, v, TifConfig(2), np.zeros((3, 4)), evaluate_on="both")
    with pytest.raises(ValueError):
        relaxed_forward(q, k, v, hardness=0.0)
