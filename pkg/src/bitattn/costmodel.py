"""Operation counting and the 45 nm energy model.

Float multiply-accumulates (MACs) are the FLOPs of the energy model and cost
4.6 pJ each; binary accumulates (ACs, one XOR-and-count of a single bit) are
the SOPs and cost 0.9 pJ each. Binary ops are counted per logical bit, never
per packed machine word: packing is a speed trick, not a change in work.

Softmax exponentials and divisions appear in the per-stage breakdown but not
in the headline FLOPs, which count MACs only.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from decimal import Decimal

E_MAC_PJ = Decimal("4.6")
E_AC_PJ = Decimal("0.9")

_FIELDS = ("mac_ops", "ac_ops", "comparisons", "additions", "exp_ops", "div_ops")


@dataclass
class OpCounter:
    mac_ops: int = 0
    ac_ops: int = 0
    comparisons: int = 0
    additions: int = 0
    exp_ops: int = 0
    div_ops: int = 0
    breakdown: dict[str, dict[str, int]] = field(default_factory=dict)

    def add(self, stage: str, **counts: int) -> None:
        """Add ``counts`` to the totals and to ``stage``'s breakdown row."""
        row = self.breakdown.setdefault(stage, {})
        for name, value in counts.items():
            if name not in _FIELDS:
                raise KeyError(f"unknown op kind {name!r}")
            if value < 0:
                raise ValueError("op counts are non-negative")
            setattr(self, name, getattr(self, name) + int(value))
            row[name] = row.get(name, 0) + int(value)

    def __add__(self, other: OpCounter) -> OpCounter:
        out = self.snapshot()
        for stage, row in other.breakdown.items():
            out.add(stage, **row)
        return out

    def snapshot(self) -> OpCounter:
        out = OpCounter()
        for stage, row in self.breakdown.items():
            out.add(stage, **row)
        return out

    def stage(self, name: str) -> dict[str, int]:
        return dict(self.breakdown.get(name, {}))


def energy_pj_exact(flops: int, sops: int) -> Decimal:
    return E_MAC_PJ * flops + E_AC_PJ * sops


@dataclass
class CostReport:
    flops: int
    sops: int
    energy_pj: float
    breakdown: dict[str, dict[str, int]]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def energy(oc: OpCounter) -> CostReport:
    """Energy in picojoules: 4.6 per MAC plus 0.9 per AC."""
    return CostReport(
        flops=oc.mac_ops,
        sops=oc.ac_ops,
        energy_pj=float(energy_pj_exact(oc.mac_ops, oc.ac_ops)),
        breakdown={k: dict(v) for k, v in oc.breakdown.items()},
    )


def _check_positive(**dims: int) -> None:
    for name, value in dims.items():
        if int(value) < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")


def count_float_attention(n: int, d: int) -> OpCounter:
    """Closed-form op counts of softmax attention on ``n`` tokens of width ``d``."""
    _check_positive(n=n, d=d)
    oc = OpCounter()
    oc.add("scores", mac_ops=n * n * d)
    oc.add("softmax", exp_ops=n * n, div_ops=n * n)
    oc.add("output", mac_ops=n * n * d)
    return oc


def count_bitwise_attention(n: int, d: int, T: int) -> OpCounter:
    """Closed-form op counts of the bitwise attention pipeline.

    Includes spiking both Q and K (one membrane addition and one threshold
    comparison per element per time step), the ``T*n*n*d`` XOR-accumulates
    of the score stage, the per-cell accumulation of ``T`` distances plus the
    ``+1`` offset, the reciprocal, and the float ``A @ V`` product.
    """
    _check_positive(n=n, d=d, T=T)
    oc = OpCounter()
    for name in ("tif_q", "tif_k"):
        oc.add(name, additions=T * n * d, comparisons=T * n * d)
    oc.add("scores", ac_ops=T * n * n * d)
    oc.add("reciprocal", additions=(T + 1) * n * n, div_ops=n * n)
    oc.add("output", mac_ops=n * n * d)
    return oc


def score_stage_ratio(n: int, d: int, T: int) -> float:
    """Bitwise score-stage ACs divided by float score-stage MACs (equals ``T``)."""
    bit = count_bitwise_attention(n, d, T).stage("scores")["ac_ops"]
    flt = count_float_attention(n, d).stage("scores")["mac_ops"]
    return bit / flt


def compare_costs(n: int, d: int, T: int) -> dict:
    """Side-by-side cost reports of float and bitwise attention.

    The quoted headline complexity ``O(T n^2)`` treats a whole-row Hamming
    distance as one step; counted per bit it is ``T n^2 d``. Both figures are
    reported so the gap is visible rather than hidden.
    """
    flt = energy(count_float_attention(n, d))
    bit = energy(count_bitwise_attention(n, d, T))
    return {
        "n": n, "d": d, "T": T,
        "float": flt.to_dict(),
        "bitwise": bit.to_dict(),
        "score_stage_op_ratio": score_stage_ratio(n, d, T),
        "score_stage_energy_ratio": float(
            (E_AC_PJ * T * n * n * d) / (E_MAC_PJ * n * n * d)),
        "headline_row_ops": T * n * n,
        "per_bit_score_ops": T * n * n * d,
    }
