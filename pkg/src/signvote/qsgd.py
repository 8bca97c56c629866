"""1-bit QSGD quantizers and per-iteration bit-cost model.

Both quantizers snap coordinate ``i`` to ``sign(g_i)`` with probability
``|g_i| / norm`` and to zero otherwise; the L2 variant uses ``||g||_2``, the
max variant ``||g||_inf``.  They exist for bit accounting and ternary
aggregation checks and are not wired into the transport.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SCHEMES = ("majority_vote", "l2_qsgd_1bit", "max_qsgd_1bit")


@dataclass(frozen=True)
class QuantizedVector:
    dim: int
    indices: np.ndarray
    signs: np.ndarray
    norm_scalar: float

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.dim):
            raise ValueError("indices must be strictly increasing and inside [0, dim)")
        if np.any(np.abs(np.asarray(self.signs)) != 1):
            raise ValueError("signs must be +1 or -1")

    @property
    def nnz(self) -> int:
        return int(np.asarray(self.indices).size)


def _quantize(g, norm: float, rng: np.random.Generator) -> QuantizedVector:
    g = np.asarray(g, dtype=np.float64)
    if norm == 0:
        return QuantizedVector(g.size, np.empty(0, np.int64), np.empty(0, np.int8), 0.0)
    keep = rng.random(g.size) < np.abs(g) / norm
    idx = np.flatnonzero(keep)
    return QuantizedVector(g.size, idx, np.where(g[idx] < 0, -1, 1).astype(np.int8), float(norm))


def l2_qsgd_quantize(g, rng: np.random.Generator) -> QuantizedVector:
    return _quantize(g, float(np.linalg.norm(g)), rng)


def max_qsgd_quantize(g, rng: np.random.Generator) -> QuantizedVector:
    g = np.asarray(g, dtype=np.float64)
    return _quantize(g, float(np.max(np.abs(g))) if g.size else 0.0, rng)


def dequantize(qv: QuantizedVector) -> np.ndarray:
    out = np.zeros(qv.dim, dtype=np.int8)
    out[np.asarray(qv.indices, dtype=np.int64)] = qv.signs
    return out


def index_bits(dim: int) -> int:
    return math.ceil(math.log2(dim)) if dim > 1 else 0


@dataclass(frozen=True)
class BitCostReport:
    scheme: str
    bits_per_iteration: int
    n_workers: int
    dim: int
    degenerate: bool = False


def bit_cost(scheme: str, M: int, d: int) -> BitCostReport:
    """Idealized bits per iteration (sign bit plus ceil(log2 d) index bits per nonzero).

    L2 QSGD is costed one-way: every worker sends its sqrt(d)-sparse message to
    the other M-1 workers.  Max QSGD is the dense ternary worst case, 2 bits
    per coordinate, which coincides with majority vote's 2Md.
    """
    if M < 1 or d < 1:
        raise ValueError("M and d must be at least 1")
    if scheme == "majority_vote" or scheme == "max_qsgd_1bit":
        bits = 2 * M * d
    elif scheme == "l2_qsgd_1bit":
        bits = math.ceil(M * (M - 1) * math.sqrt(d) * (1 + index_bits(d)))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return BitCostReport(scheme, int(bits), M, d, degenerate=(scheme == "l2_qsgd_1bit" and M == 1))


def majority_cheaper(M: int, d: int) -> bool:
    return bit_cost("majority_vote", M, d).bits_per_iteration < bit_cost("l2_qsgd_1bit", M, d).bits_per_iteration
