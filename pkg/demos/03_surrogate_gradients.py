"""Gradients through a non-differentiable spike pipeline.

The hard forward is piecewise constant in Q and K, so finite differences
are almost always zero. A sigmoid replaces the step and squared differences
replace XOR; backward() differentiates that relaxation exactly.
"""
import numpy as np

from bitattn import TifConfig, backward, hard_forward, relaxed_forward

rng = np.random.default_rng(3)
q, k, v, up = rng.normal(size=(4, 3, 4))
cfg = TifConfig(2)


def loss_hard(qq):
    return np.sum(up * hard_forward(qq, k, v, cfg).output)


stats = relaxed_forward(q, k, v, cfg).stats


def loss_relaxed(qq):
    return np.sum(up * relaxed_forward(qq, k, v, cfg, stats=stats).output)


h = 1e-5
e = np.zeros_like(q)
e[0, 0] = h
print("hard FD      ", (loss_hard(q + e) - loss_hard(q - e)) / (2 * h))
print("relaxed FD   ", (loss_relaxed(q + e) - loss_relaxed(q - e)) / (2 * h))

g = backward(q, k, v, cfg, up)
print("analytic dQ  ", g.d_q[0, 0])

# evaluate the surrogate on hard spikes instead; this is what training uses
g_hard = backward(q, k, v, cfg, up, evaluate_on="hard")
print("hard-evaluated dQ", g_hard.d_q[0, 0])
print("dV is exact either way:", np.allclose(g.d_v, g_hard.d_v))
