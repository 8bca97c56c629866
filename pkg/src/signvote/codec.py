"""1-bit sign codec.

Sign vectors live in {-1, +1}^d and travel as packed bytes: coordinate ``i``
is bit ``i % 8`` of byte ``i // 8`` (LSB-first), a set bit means ``+1``, and
padding bits past ``dim`` are always zero.  Zero entries are treated as
``+1`` everywhere, on workers and on the server.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MalformedPayload(ValueError):
    """Packed payload has the wrong length or nonzero padding bits."""


def payload_size(dim: int) -> int:
    return (dim + 7) // 8


@dataclass(frozen=True)
class SignVector:
    dim: int
    payload: bytes

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if len(self.payload) != payload_size(self.dim):
            raise MalformedPayload(
                f"payload is {len(self.payload)} bytes, expected {payload_size(self.dim)} for dim={self.dim}"
            )
        _check_padding(self.dim, self.payload)

    def signs(self) -> np.ndarray:
        return unpack(self)


@dataclass(frozen=True)
class VoteTally:
    """Per-coordinate sum of ``n_votes`` sign vectors."""

    dim: int
    counts: np.ndarray
    n_votes: int


def _check_padding(dim: int, payload: bytes) -> None:
    spare = 8 * len(payload) - dim
    if spare and payload[-1] >> (8 - spare):
        raise MalformedPayload(f"nonzero padding bits in final byte 0x{payload[-1]:02X} (dim={dim})")


def take_sign(v) -> np.ndarray:
    """Dense sign of ``v`` as int8, with sign(0) = +1.

    NaN entries are rejected; the error message names the first offending index.
    """
    v = np.asarray(v)
    if v.dtype.kind == "f" and np.isnan(v).any():
        raise ValueError(f"NaN at coordinate {int(np.flatnonzero(np.isnan(v))[0])}")
    return np.where(v < 0, _MINUS, _PLUS)


_MINUS, _PLUS = np.int8(-1), np.int8(1)


def pack(s) -> SignVector:
    s = np.asarray(s)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("sign vector must be a non-empty 1-D array")
    if np.any(np.abs(s) != 1):
        bad = int(np.flatnonzero(np.abs(s) != 1)[0])
        raise ValueError(f"entry {s[bad]!r} at coordinate {bad} is not +1/-1")
    bits = np.packbits(s > 0, bitorder="little")
    return SignVector(int(s.size), bits.tobytes())


def unpack(sv: SignVector) -> np.ndarray:
    _check_padding(sv.dim, sv.payload)
    buf = np.frombuffer(sv.payload, dtype=np.uint8)
    bits = np.unpackbits(buf, count=sv.dim, bitorder="little")
    return (2 * bits.astype(np.int8) - 1).astype(np.int8)


def majority_sum(votes) -> VoteTally:
    votes = list(votes)
    if not votes:
        raise ValueError("need at least one vote")
    dim = votes[0].dim
    counts = np.zeros(dim, dtype=np.int64)
    for m, sv in enumerate(votes):
        if sv.dim != dim:
            raise ValueError(f"vote {m} has dim {sv.dim}, expected {dim}")
        counts += unpack(sv)
    return VoteTally(dim, counts, len(votes))


def tally_sign(t: VoteTally) -> SignVector:
    return pack(take_sign(t.counts))
