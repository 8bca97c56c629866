"""Parameter-server side of majority vote, plus the exact vote-failure calculator."""
from __future__ import annotations

import math
import threading

import numpy as np
from scipy.stats import binom

from . import codec
from .codec import SignVector


class ProtocolError(RuntimeError):
    """A worker broke the bulk-synchronous round protocol."""


class DuplicateVote(ProtocolError):
    pass


class StaleRound(ProtocolError):
    pass


class DimensionMismatch(ProtocolError):
    pass


class UnknownWorker(ProtocolError):
    pass


class VoteServer:
    """Collects one vote per worker per round and emits sign(sum of votes).

    Only the running integer tally and a per-worker flag are stored, so memory
    is O(d + M).  ``submit`` is safe to call from several threads; the call
    that delivers the M-th vote gets the broadcast back and every other call
    gets ``None``.
    """

    def __init__(self, n_workers: int, dim: int):
        if n_workers < 1:
            raise ValueError("need at least one worker")
        if dim < 1:
            raise ValueError("dim must be positive")
        self.n_workers = n_workers
        self.dim = dim
        self.round = 0
        self.last_tally: codec.VoteTally | None = None
        self._counts = np.zeros(dim, dtype=np.int64)
        self._seen = bytearray(n_workers)
        self._n_seen = 0
        self._lock = threading.Lock()

    @property
    def pending(self) -> int:
        return self._n_seen

    def submit(self, worker_id: int, round: int, sv: SignVector) -> SignVector | None:
        with self._lock:
            if not 0 <= worker_id < self.n_workers:
                raise UnknownWorker(f"worker id {worker_id} outside [0, {self.n_workers})")
            if round != self.round:
                raise StaleRound(f"worker {worker_id} voted for round {round}, server is at round {self.round}")
            if self._seen[worker_id]:
                raise DuplicateVote(f"worker {worker_id} already voted in round {round}")
            if sv.dim != self.dim:
                raise DimensionMismatch(f"worker {worker_id} sent dim {sv.dim}, expected {self.dim}")
            self._counts += codec.unpack(sv)
            self._seen[worker_id] = 1
            self._n_seen += 1
            if self._n_seen < self.n_workers:
                return None
            tally = codec.VoteTally(self.dim, self._counts.copy(), self.n_workers)
            self.last_tally = tally
            self._counts[:] = 0
            self._seen[:] = bytes(self.n_workers)
            self._n_seen = 0
            self.round += 1
            return codec.tally_sign(tally)


ADVERSARY_SUCCESS = {
    # probability that one adversary's bit is correct, given honest success p
    "invert": lambda p: 1.0 - p,
    "rescale": lambda p: p,
    "none": lambda p: p,
    "sign_randomize": lambda p: 0.5,
}


def adversary_count(M: int, alpha: float) -> int:
    count = alpha * M
    nearest = round(count)
    if abs(count - nearest) > 1e-9:
        raise ValueError(f"alpha * M = {count!r} is not an integer (M={M}, alpha={alpha!r})")
    return int(nearest)


def correct_vote_pmf(M: int, alpha: float, p: float, adversary: str = "invert") -> np.ndarray:
    """Exact distribution of Z, the number of correct sign bits the server receives."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    bad = adversary_count(M, alpha)
    good = M - bad
    q = ADVERSARY_SUCCESS[adversary](p)
    pmf_good = binom.pmf(np.arange(good + 1), good, p)
    pmf_bad = binom.pmf(np.arange(bad + 1), bad, q)
    return np.convolve(pmf_good, pmf_bad)


def vote_outcome_distribution(M: int, alpha: float, p: float, adversary: str = "invert") -> float:
    """Exact P[Z <= M/2]; a tie at even M counts as a failed vote."""
    pmf = correct_vote_pmf(M, alpha, p, adversary)
    return float(min(1.0, pmf[: math.floor(M / 2) + 1].sum()))
