"""Counting operations and energy for float vs bitwise attention."""
from bitattn import OpCounter, TifConfig, compare_costs, energy, naive_bitwise_attention, tif_convert
import numpy as np

c = compare_costs(n=128, d=64, T=8)
print("float   ", c["float"]["flops"], "MACs", c["float"]["energy_pj"], "pJ")
print("bitwise ", c["bitwise"]["flops"], "MACs", c["bitwise"]["sops"], "ACs", c["bitwise"]["energy_pj"], "pJ")
# score stage: T accumulates per MAC replaced, at 0.9 pJ instead of 4.6 pJ
print("score stage op ratio", c["score_stage_op_ratio"], "energy ratio", round(c["score_stage_energy_ratio"], 4))
print("row-level ops", c["headline_row_ops"], "vs per-bit ops", c["per_bit_score_ops"])

# the closed form matches what the loop implementation actually does
rng = np.random.default_rng(0)
oc = OpCounter()
qb = tif_convert(rng.normal(size=(5, 3)), TifConfig(2), counter=oc, stage="tif_q")
kb = tif_convert(rng.normal(size=(5, 3)), TifConfig(2), counter=oc, stage="tif_k")
oc = oc + naive_bitwise_attention(qb, kb, rng.normal(size=(5, 3))).ops
for stage, counts in oc.breakdown.items():
    print(f"  {stage:10s} {counts}")
print(energy(oc).to_json())
