"""Bitwise attention with integrate-and-fire binarization.

Float queries and keys are turned into ``T`` binary time steps by an IF
neuron, compared with XOR + popcount, and scored as ``1 / (distance + 1)``.
Surrogate gradients make the pipeline trainable; a small cost model counts
MACs and accumulates.
"""

from .attention import AttentionResult, bitwise_attention, naive_bitwise_attention
from .bitcore import BitTimeTensor, hamming, pack, unpack
from .costmodel import OpCounter, compare_costs, energy
from .errors import DomainError, ShapeError
from .matrixcore import NormMode, reference_attention
from .surrogate import backward, hard_forward, relaxed_forward
from .tif import TifConfig, spike_sum, tif_convert

__version__ = "0.1.0"

__all__ = [
    "AttentionResult", "BitTimeTensor", "DomainError", "NormMode", "OpCounter", "ShapeError",
    "TifConfig", "backward", "bitwise_attention", "compare_costs", "energy", "hamming",
    "hard_forward", "naive_bitwise_attention", "pack", "reference_attention", "relaxed_forward",
    "spike_sum", "tif_convert", "unpack",
]
