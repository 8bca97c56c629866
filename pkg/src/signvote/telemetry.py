"""Per-round records shared by the round driver, transports and the harness."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .bounds import mixed_norm_profile
from .codec import take_sign


@dataclass(frozen=True)
class RoundRecord:
    round: int
    f: float
    grad_l1: float
    mixed_norm: float
    n_high_snr: int
    vote_disagreement: int
    bits: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def round_bits(n_workers: int, dim: int) -> int:
    """Sign bits on the wire for one round: M votes up, M broadcasts down."""
    return 2 * n_workers * dim


def make_record(k: int, objective, x, broadcast_signs, n_workers: int) -> RoundRecord:
    """Telemetry at iterate ``x`` (before the round-``k`` update is applied)."""
    g = objective.gradient(x)
    mixed, n_high = mixed_norm_profile(g, objective.sigma())
    disagree = int(np.count_nonzero(np.asarray(broadcast_signs) != take_sign(g)))
    return RoundRecord(
        round=k,
        f=objective.value(x),
        grad_l1=float(np.abs(g).sum()),
        mixed_norm=mixed,
        n_high_snr=n_high,
        vote_disagreement=disagree,
        bits=round_bits(n_workers, objective.dim),
    )
