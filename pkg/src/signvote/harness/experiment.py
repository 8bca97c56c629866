"""End-to-end experiment driver."""
from __future__ import annotations

import math
import multiprocessing
import queue
from dataclasses import dataclass, field, replace

import numpy as np

from .. import bounds, codec
from ..adversary import AdversarySpec, adversary_multiplier, corrupt
from ..aggregation import VoteServer
from ..oracles import Logistic, Quadratic, make_logistic_dataset
from ..optim import Schedule, Worker, worker_rng
from ..telemetry import RoundRecord, make_record, round_bits
from ..transport import WireStats, sim_network
from ..transport.tcp import DEFAULT_TIMEOUT, TcpServer, run_worker
from .config import ExperimentConfig

class ExperimentError(RuntimeError):
    pass


class TransportAborted(ExperimentError):
    def __init__(self, round, reason):
        super().__init__(f"transport aborted in round {round}: {reason}")
        self.round, self.reason = round, reason


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[RoundRecord]
    summary: dict
    final_x: list[np.ndarray] = field(default_factory=list)
    wire: WireStats | None = None


def build_objective(cfg: ExperimentConfig):
    if cfg.objective == "quadratic":
        return Quadratic(cfg.dim, cfg.noise)
    data = make_logistic_dataset(cfg.logistic_seed, cfg.logistic_examples, cfg.dim, cfg.logistic_flip_rate)
    return Logistic(data)


def initial_point(cfg: ExperimentConfig) -> np.ndarray:
    return np.full(cfg.dim, float(cfg.x0))


def resolve_optimizer(cfg: ExperimentConfig, objective=None):
    objective = objective or build_objective(cfg)
    spec = objective.spec(initial_point(cfg))
    if cfg.schedule == "constant":
        return cfg.optimizer
    return Schedule(cfg.schedule, cfg.rounds, spec.f_gap, spec.L1).resolve(cfg.optimizer)


def _worker_adversary(spec: AdversarySpec, worker_id: int) -> AdversarySpec:
    if spec.honest:
        return spec
    seed = int(np.random.SeedSequence([spec.seed, worker_id]).generate_state(1)[0])
    return replace(spec, seed=seed)


def build_worker(cfg: ExperimentConfig, worker_id: int, objective=None) -> Worker:
    objective = objective or build_objective(cfg)
    opt = resolve_optimizer(cfg, objective)
    spec = _worker_adversary(cfg.worker_adversaries()[worker_id], worker_id)
    return Worker(worker_id, initial_point(cfg), objective, opt, cfg.seed, spec)


def build_workers(cfg: ExperimentConfig, objective=None) -> list[Worker]:
    objective = objective or build_objective(cfg)
    return [build_worker(cfg, m, objective) for m in range(cfg.workers)]


def summarize(cfg: ExperimentConfig, objective, records: list[RoundRecord], final_x, opt) -> dict:
    spec = objective.spec(initial_point(cfg))
    K = len(records)
    summary = {
        "rounds": K,
        "workers": cfg.workers,
        "dim": cfg.dim,
        "alpha": cfg.alpha,
        "eta": opt.eta,
        "batch_size": opt.batch_size,
        "f0": spec.f0,
        "final_f": objective.value(final_x),
        "mean_mixed_norm": float(np.mean([r.mixed_norm for r in records])) if K else math.nan,
        "mean_grad_l1": float(np.mean([r.grad_l1 for r in records])) if K else math.nan,
        "bits_per_round": round_bits(cfg.workers, cfg.dim),
    }
    if K and spec.f_gap > 0 and math.isfinite(spec.f_gap):
        summary["theorem1_rhs"] = bounds.theorem1_rhs(spec.L1, spec.f_gap, K)
        if cfg.alpha < 0.5:
            n_calls = K * opt.batch_size
            summary["theorem2_rhs"] = bounds.theorem2_rhs(
                spec.L1, spec.f_gap, float(np.sum(spec.noise_sigma)), cfg.workers, cfg.alpha, n_calls)
            summary["mean_grad_l1_squared"] = summary["mean_grad_l1"] * summary["mean_grad_l1"]
    return summary


def _check_finite(records):
    for r in records:
        if math.isnan(r.f):
            raise ExperimentError(f"objective became NaN in round {r.round}")


def run_experiment(cfg: ExperimentConfig, timeout: float = DEFAULT_TIMEOUT) -> ExperimentResult:
    objective = build_objective(cfg)
    opt = resolve_optimizer(cfg, objective)
    if cfg.aggregation == "mean":
        return _run_mean_sgd(cfg, objective, opt)
    if cfg.transport == "sim":
        workers = build_workers(cfg, objective)
        trace = sim_network(workers, VoteServer(cfg.workers, cfg.dim), cfg.rounds, cfg.seed, objective=objective)
        if trace.aborted:
            raise TransportAborted(trace.abort_round, trace.abort_reason)
        records, final, wire = trace.records, [w.x.copy() for w in workers], trace.stats
    else:
        records, final, wire = _run_tcp(cfg, timeout)
    _check_finite(records)
    return ExperimentResult(cfg, records, summarize(cfg, objective, records, final[0], opt), final, wire)


def _tcp_worker(cfg, worker_id, address, timeout, results):
    objective = build_objective(cfg)
    worker = build_worker(cfg, worker_id, objective)
    records = []

    def observe(k, x_before, sv):
        records.append(make_record(k, objective, x_before, codec.unpack(sv), cfg.workers))

    report = run_worker(address, worker, cfg.rounds, timeout, on_round=observe if worker_id == 0 else None)
    results.put((worker_id, report.exit_status, report.reason, report.x, records))


def _run_tcp(cfg, timeout):
    """Loopback run: server in this process, one OS process per worker."""
    server = TcpServer(("127.0.0.1", 0), cfg.workers, cfg.rounds, cfg.dim, timeout)
    ctx = multiprocessing.get_context("fork")
    results = ctx.Queue()
    procs = [ctx.Process(target=_tcp_worker, args=(cfg, m, server.address, timeout, results), daemon=True)
             for m in range(cfg.workers)]
    for p in procs:
        p.start()
    try:
        server_report = server.serve()
        collected = {}
        for _ in procs:
            try:
                wid, status, reason, x, records = results.get(timeout=timeout)
            except queue.Empty:
                break
            collected[wid] = (status, reason, x, records)
    finally:
        for p in procs:
            p.join(timeout)
            if p.is_alive():
                p.terminate()
    if server_report.exit_status != 0:
        raise TransportAborted(server_report.rounds_completed, server_report.abort_reason)
    for m in range(cfg.workers):
        if m not in collected:
            raise TransportAborted(server_report.rounds_completed, f"worker {m} never reported")
        if collected[m][0] != 0:
            raise TransportAborted(server_report.rounds_completed, collected[m][1])
    return collected[0][3], [collected[m][2] for m in range(cfg.workers)], server_report.stats


def _run_mean_sgd(cfg, objective, opt) -> ExperimentResult:
    """Plain distributed SGD: the server averages dense gradients.

    Only here as the non-robust contrast; an adversary's rescaled gradient
    passes straight into the update.
    """
    x = initial_point(cfg)
    specs = [_worker_adversary(s, m) for m, s in enumerate(cfg.worker_adversaries())]
    rngs = [worker_rng(cfg.seed, m) for m in range(cfg.workers)]
    float_bits = 2 * 32 * cfg.workers * cfg.dim
    records = []
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.rounds):
            if not np.all(np.isfinite(x)):
                break
            grads = []
            for m in range(cfg.workers):
                g = objective.sample(x, rngs[m], opt.batch_size).values
                if not specs[m].honest:
                    g = corrupt(g, adversary_multiplier(specs[m], k, cfg.dim))
                grads.append(g)
            step = np.mean(grads, axis=0)
            rec = make_record(k, objective, x, codec.take_sign(np.nan_to_num(step)), cfg.workers)
            records.append(replace(rec, bits=float_bits))
            x = x - opt.eta * (step + opt.weight_decay * x)
    summary = summarize(cfg, objective, records, x, opt)
    summary["bits_per_round"] = float_bits
    return ExperimentResult(cfg, records, summary, [x])
