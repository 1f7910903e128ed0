"""Attention scores from Hamming distances instead of dot products."""
import numpy as np

from bitattn import TifConfig, bitwise_attention, naive_bitwise_attention, tif_convert
from bitattn.attention import dot_vs_hamming_separation
from bitattn.bitcore import dumps, hamming, load

rng = np.random.default_rng(7)
n, d = 6, 16
q, k, v = rng.normal(size=(3, n, d))
cfg = TifConfig(8)

qb, kb = tif_convert(q, cfg), tif_convert(k, cfg)
res = bitwise_attention(qb, kb, v)
print("distance sums\n", res.distances)
print("scores (1 / (dist + 1)), no softmax\n", np.round(res.scores, 4))

# the packed kernel agrees with the plain loop version bit for bit
slow = naive_bitwise_attention(qb, kb, v)
print("identical to loops:", np.array_equal(res.scores, slow.scores), np.array_equal(res.output, slow.output))

# on 0/1 data a dot product cannot tell these two keys apart
demo = dot_vs_hamming_separation()
print("x", demo.x, "y1", demo.y1, "y2", demo.y2)
print("dot", demo.dot1, demo.dot2, "| hamming", demo.hamming1, demo.hamming2,
      "| score", demo.score1, demo.score2)

print(hamming([1, 0, 1, 1], [0, 0, 1, 0]))

# round trip through the binary dump format
assert load(dumps(qb)) == qb
