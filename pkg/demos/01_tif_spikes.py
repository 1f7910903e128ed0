"""Turning floats into spike trains.

A value x in [0, 1] fed to an IF neuron for T steps fires floor(T*x) times.
"""
import numpy as np

from bitattn.tif import TifConfig, ratio_gamma, spike_sum_report, spike_train, tif_convert

# a single value, step by step
print(spike_train(0.45, 8))           # 0 0 1 0 1 0 1 0 -> 3 spikes
rep = spike_sum_report(0.45, TifConfig(8))
print("sum", rep.spike_sum, "floor(T*x)", rep.floor_tx, "fraction lost", round(rep.alpha, 3))

# 0.3 * 10 is exactly 3 but accumulates to 2.9999999999999996 in the membrane
rep = spike_sum_report(0.3, TifConfig(10))
print("x=0.3 T=10:", rep.spike_sum, "vs", rep.floor_tx, "near boundary:", rep.near_boundary)

# more steps, better ratios
for T in (4, 16, 64, 256):
    print(f"T={T:4d} gamma(0.7, 0.2) = {ratio_gamma(0.7, 0.2, T)}")

# a whole matrix: min-max scaled, then packed into T x n x d bits
m = np.random.default_rng(0).normal(size=(3, 5))
bits = tif_convert(m, TifConfig(4))
print(bits.shape, bits.words.dtype)
