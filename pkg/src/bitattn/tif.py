"""Integrate-and-fire dynamics and time-integrate-and-fire (TIF) binarization.

A float ``x`` is fed as a constant input current to an IF neuron for ``T``
steps with soft reset. With threshold 1 and ``x`` in ``[0, 1]`` the neuron
fires exactly ``floor(T * x)`` times, so the spike count is a quantized copy
of the input and ratios of spike counts converge to ratios of inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitcore import BitTimeTensor, pack
from .costmodel import OpCounter
from .errors import DomainError
from .matrixcore import NormMode, as_matrix, minmax_pretransform


@dataclass(frozen=True)
class TifConfig:
    time_steps: int = 8
    v_th: float = 1.0
    norm_mode: NormMode = NormMode.UNIT_RANGE

    def __post_init__(self):
        if int(self.time_steps) != self.time_steps or self.time_steps < 1:
            raise ValueError(f"time_steps must be a positive integer, got {self.time_steps}")
        if not (math.isfinite(self.v_th) and self.v_th > 0):
            raise ValueError(f"v_th must be positive, got {self.v_th}")
        object.__setattr__(self, "norm_mode", NormMode(self.norm_mode))


def heaviside(x):
    """Step function with ``heaviside(0) == 1``."""
    return np.asarray(x) >= 0


def if_step(membrane: float, input: float, v_th: float = 1.0) -> tuple[int, float]:
    """One IF update; returns ``(spike, membrane after reset)``."""
    if not (math.isfinite(membrane) and math.isfinite(input)):
        raise DomainError("IF inputs must be finite")
    if v_th <= 0:
        raise DomainError("v_th must be positive")
    h = membrane + input
    s = 1 if h - v_th >= 0 else 0
    return s, h * (1 - s) + (h - v_th) * s


def if_trajectory(x: np.ndarray, time_steps: int, v_th: float = 1.0):
    """Run the IF recurrence with constant input ``x`` (any shape).

    Returns ``(spikes, h)``, both of shape ``(T, *x.shape)``: boolean spikes
    and the pre-reset membrane potentials. The membrane starts at zero.
    """
    x = np.asarray(x, dtype=np.float64)
    spikes = np.empty((time_steps,) + x.shape, dtype=bool)
    h_hist = np.empty((time_steps,) + x.shape, dtype=np.float64)
    v = np.zeros_like(x)
    for t in range(time_steps):
        h = v + x
        s = heaviside(h - v_th)
        v = np.where(s, h - v_th, h)
        spikes[t] = s
        h_hist[t] = h
    return spikes, h_hist


def tif_convert(m, cfg: TifConfig = TifConfig(), counter: OpCounter | None = None,
                stage: str = "tif") -> BitTimeTensor:
    """Pre-transform ``m`` per ``cfg.norm_mode`` and spike it into a ``T x n x d`` tensor."""
    x = minmax_pretransform(as_matrix(m, "m"), cfg.norm_mode)
    spikes, _ = if_trajectory(x, cfg.time_steps, cfg.v_th)
    if counter is not None:
        counter.add(stage, additions=spikes.size, comparisons=spikes.size)
    return pack(spikes)


def spike_train(x: float, time_steps: int, v_th: float = 1.0) -> np.ndarray:
    """Spike train (0/1 ints) of a single scalar."""
    if not math.isfinite(x):
        raise DomainError("x must be finite")
    spikes, _ = if_trajectory(np.float64(x), time_steps, v_th)
    return spikes.astype(np.int64)


def spike_sum(x, time_steps: int, v_th: float = 1.0):
    spikes, _ = if_trajectory(x, time_steps, v_th)
    return spikes.sum(axis=0)


@dataclass(frozen=True)
class TifApproxReport:
    x: float
    time_steps: int
    spike_sum: int
    floor_tx: int
    lam: int  # integer part of T*x
    alpha: float  # fractional part of T*x, in [0, 1)
    spikes: tuple[int, ...]
    near_boundary: bool  # T*x within 1e-9 of an integer

    @property
    def agrees(self) -> bool:
        return self.spike_sum == self.floor_tx


def spike_sum_report(x: float, cfg: TifConfig = TifConfig()) -> TifApproxReport:
    """Compare the simulated spike count of ``x`` against ``floor(T * x)``.

    Near integer values of ``T * x`` the accumulated membrane can land a hair
    below threshold; such inputs are flagged with ``near_boundary`` and may
    disagree by one.
    """
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x}")
    if cfg.v_th != 1.0:
        raise DomainError("the floor identity needs v_th = 1")
    T = cfg.time_steps
    train = spike_train(x, T, cfg.v_th)
    tx = T * x
    lam = math.floor(tx)
    return TifApproxReport(
        x=x,
        time_steps=T,
        spike_sum=int(train.sum()),
        floor_tx=lam,
        lam=lam,
        alpha=tx - lam,
        spikes=tuple(int(b) for b in train),
        near_boundary=abs(tx - round(tx)) < 1e-9 and 0.0 < x < 1.0,
    )


def boundary_guard(x, t_values, eps: float = 1e-9):
    """Move each ``x`` at least ``eps`` away from every ``k / T`` inside (0, 1).

    The end points 0 and 1 are exact under the recurrence and left alone.
    """
    x = np.array(x, dtype=np.float64)
    for T in t_values:
        k = np.round(x * T)
        close = (np.abs(x - k / T) < eps) & (x > 0) & (x < 1)
        up = k / T + eps
        x = np.where(close, np.where(up < 1, up, k / T - eps), x)
    return x


def ratio_convergence(x: float, y: float, t_values) -> list[tuple[int, float | None]]:
    """``|x/y - S(x)/S(y)|`` per ``T``; ``None`` where ``y`` never fires."""
    for name, val in (("x", x), ("y", y)):
        if not (0.0 < val <= 1.0):
            raise DomainError(f"{name} must lie in (0, 1], got {val}")
    out = []
    for T in t_values:
        sx = int(spike_train(x, T).sum())
        sy = int(spike_train(y, T).sum())
        out.append((int(T), None if sy == 0 else abs(x / y - sx / sy)))
    return out


def spike_matrix(m, cfg: TifConfig, stats: tuple[float, float] | None = None):
    """Pre-transform and spike ``m``; returns ``(x, spikes, h)``.

    ``stats`` freezes the (min, max) used by the pre-transform.
    """
    x = minmax_pretransform(as_matrix(m, "m"), cfg.norm_mode, stats=stats)
    spikes, h = if_trajectory(x, cfg.time_steps, cfg.v_th)
    return x, spikes, h


def ratio_gamma(x: float, y: float, time_steps: int) -> float | None:
    """``(x / y) / (S(x) / S(y))``; ``None`` when either spike count is zero.

    Writing ``T*x = l0 + a0`` and ``T*y = l1 + a1`` gives
    ``|gamma - 1| < 1 / min(l0, l1)``, so gamma tends to 1 as ``T`` grows.
    The absolute gap ``|x/y - S(x)/S(y)|`` shrinks too, but only like
    ``x / (T * y**2)``: for small ``y`` it stays large at moderate ``T``.
    """
    sx = int(spike_train(x, time_steps).sum())
    sy = int(spike_train(y, time_steps).sum())
    if sx == 0 or sy == 0:
        return None
    return (x / y) / (sx / sy)
