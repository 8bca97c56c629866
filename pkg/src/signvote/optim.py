"""Worker and server update rules for Signum with majority vote.

Each round every worker draws a mini-batch gradient, folds it into its local
momentum, and sends the sign of the momentum.  The server sums the signs and
broadcasts the sign of the sum; every worker then applies

    x <- x - eta * (sign(V) + lambda * x)

so parameters stay bit-identical across replicas.  ``beta = 0`` is plain
signSGD.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import codec
from .adversary import AdversarySpec, adversary_multiplier, corrupt
from .aggregation import ProtocolError, VoteServer
from .codec import SignVector
from .oracles import StochasticGradient
from .telemetry import RoundRecord, make_record


@dataclass(frozen=True)
class OptimizerConfig:
    eta: float = 0.01
    beta: float = 0.0
    weight_decay: float = 0.0
    batch_size: int = 1

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta!r}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta!r}")
        if not self.weight_decay >= 0:
            raise ValueError(f"weight decay must be nonnegative, got {self.weight_decay!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be at least 1, got {self.batch_size!r}")


@dataclass
class WorkerState:
    x: np.ndarray
    v: np.ndarray | None = None
    rng_seed: int = 0

    def __post_init__(self):
        self.x = np.array(self.x, dtype=np.float64)
        if self.v is None:
            self.v = np.zeros_like(self.x)
        if self.v.shape != self.x.shape:
            raise ValueError("momentum and parameters must have the same shape")


SCHEDULE_KINDS = ("constant", "theorem1", "theorem2")


@dataclass(frozen=True)
class Schedule:
    kind: str = "constant"
    horizon: int = 1
    f_gap: float | None = None
    L1: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.kind != "constant" and (self.f_gap is None or self.L1 is None):
            raise ValueError(f"{self.kind} schedule needs f_gap and L1")

    def resolve(self, base: OptimizerConfig) -> OptimizerConfig:
        """Overwrite eta (and batch size) in ``base`` as the schedule dictates."""
        if self.kind == "constant":
            return base
        if self.kind == "theorem1":
            return OptimizerConfig(theorem1_eta(self.f_gap, self.L1, self.horizon), base.beta, base.weight_decay, 1)
        eta, n = theorem2_schedule(self.f_gap, self.L1, self.horizon)
        return OptimizerConfig(eta, base.beta, base.weight_decay, n)


def theorem1_eta(f_gap: float, L1: float, K: int) -> float:
    """eta = sqrt((f0 - f*) / (||L||_1 K)), used with batch size 1."""
    if not (f_gap > 0 and L1 > 0 and K > 0):
        raise ValueError(f"f_gap, L1 and K must be positive, got {(f_gap, L1, K)!r}")
    return math.sqrt(f_gap / (L1 * K))


def theorem2_schedule(f_gap: float, L1: float, K: int) -> tuple[float, int]:
    """Same eta as :func:`theorem1_eta` with the batch size grown to K."""
    return theorem1_eta(f_gap, L1, K), int(K)


def worker_momentum_update(state: WorkerState, g_tilde, beta: float) -> np.ndarray:
    g = g_tilde.values if isinstance(g_tilde, StochasticGradient) else np.asarray(g_tilde, dtype=np.float64)
    if g.shape != state.v.shape:
        raise ValueError(f"gradient shape {g.shape} does not match momentum shape {state.v.shape}")
    if np.isnan(g).any():
        raise ValueError(f"NaN in stochastic gradient at coordinate {int(np.flatnonzero(np.isnan(g))[0])}")
    state.v = (1.0 - beta) * g + beta * state.v
    return state.v


def apply_vote(state: WorkerState, vote: SignVector, eta: float, weight_decay: float) -> np.ndarray:
    if vote.dim != state.x.size:
        raise ValueError(f"vote has dim {vote.dim}, parameters have {state.x.size}")
    s = codec.unpack(vote).astype(np.float64)
    state.x = state.x - eta * (s + weight_decay * state.x)
    return state.x


def signsgd_step(x, g_tilde, eta: float) -> np.ndarray:
    """Reference single-node step x - eta * sign(g~), written independently of Worker."""
    return np.asarray(x, dtype=np.float64) - eta * codec.take_sign(g_tilde)


def worker_rng(base_seed: int, worker_id: int) -> np.random.Generator:
    """Counter-based stream owned by one worker, keyed on (base_seed, worker_id)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([base_seed, worker_id])))


class Worker:
    """One replica: owns its parameters, momentum and random stream."""

    def __init__(self, worker_id: int, x0, objective, config: OptimizerConfig,
                 base_seed: int = 0, adversary: AdversarySpec | None = None):
        self.worker_id = worker_id
        self.objective = objective
        self.config = config
        self.adversary = adversary or AdversarySpec()
        self.state = WorkerState(x0, rng_seed=base_seed)
        self.rng = worker_rng(base_seed, worker_id)
        self.updates = 0
        self.last_gradient: StochasticGradient | None = None

    @property
    def x(self) -> np.ndarray:
        return self.state.x

    @property
    def dim(self) -> int:
        return self.state.x.size

    def compute_vote(self, round: int) -> SignVector:
        sg = self.objective.sample(self.state.x, self.rng, self.config.batch_size)
        sg.round, sg.worker_id = round, self.worker_id
        if not self.adversary.honest:
            sg.values = corrupt(sg.values, adversary_multiplier(self.adversary, round, self.dim))
        self.last_gradient = sg
        v = worker_momentum_update(self.state, sg, self.config.beta)
        return codec.pack(codec.take_sign(v))

    def apply(self, vote: SignVector) -> None:
        apply_vote(self.state, vote, self.config.eta, self.config.weight_decay)
        self.updates += 1


class RoundFailed(RuntimeError):
    def __init__(self, round: int, cause: Exception):
        super().__init__(f"round {round}: {cause}")
        self.round = round
        self.cause = cause


def run_round(workers: list[Worker], server: VoteServer, objective=None) -> RoundRecord | None:
    """One bulk-synchronous iteration, in process and without framing.

    Returns telemetry at the pre-update iterate when ``objective`` is given.
    """
    k = server.round
    x_before = workers[0].x.copy()
    broadcast = None
    try:
        for w in workers:
            out = server.submit(w.worker_id, k, w.compute_vote(k))
            if out is not None:
                broadcast = out
    except (ProtocolError, ValueError) as exc:
        raise RoundFailed(k, exc) from exc
    if broadcast is None:
        raise RoundFailed(k, ProtocolError(f"only {server.pending} of {server.n_workers} votes arrived"))
    for w in workers:
        w.apply(broadcast)
    if objective is None:
        return None
    return make_record(k, objective, x_before, codec.unpack(broadcast), len(workers))
