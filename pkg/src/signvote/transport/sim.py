"""Deterministic in-process network.

Frames are really encoded and decoded, exactly as on TCP; only the sockets
are replaced by an event queue.  The scheduler seed permutes the order in
which votes reach the server each round, which must not change the outcome.
"""
from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field

import numpy as np

from .. import codec
from ..aggregation import ProtocolError, VoteServer
from ..telemetry import RoundRecord, make_record
from .frames import Frame, FrameError, MsgType, WireStats, decode_frame, encode_frame


@dataclass(frozen=True)
class TraceEvent:
    time: int
    round: int
    msg_type: str
    src: str
    dst: str
    nbytes: int
    digest: str


@dataclass
class SimTrace:
    events: list[TraceEvent] = field(default_factory=list)
    stats: WireStats = field(default_factory=WireStats)
    records: list[RoundRecord] = field(default_factory=list)
    rounds_completed: int = 0
    aborted: bool = False
    abort_round: int | None = None
    abort_reason: str = ""

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for e in self.events:
            h.update(f"{e.time}|{e.round}|{e.msg_type}|{e.src}|{e.dst}|{e.nbytes}|{e.digest}\n".encode())
        return h.hexdigest()


class _Network:
    def __init__(self, trace: SimTrace):
        self.trace = trace
        self.queue: list = []
        self.clock = 0
        self.seq = 0

    def send(self, src: str, dst: str, frame: Frame, delay: int = 1) -> None:
        data = encode_frame(frame)
        self.trace.events.append(TraceEvent(
            self.clock, frame.round, frame.msg_type.name, src, dst, len(data), hashlib.sha1(data).hexdigest()))
        heapq.heappush(self.queue, (self.clock + delay, self.seq, dst, data))
        self.seq += 1

    def drain(self):
        while self.queue:
            self.clock, _, dst, data = heapq.heappop(self.queue)
            yield dst, data


def sim_network(workers, server: VoteServer, rounds: int, seed: int = 0, *,
                drop=frozenset(), objective=None) -> SimTrace:
    """Run ``rounds`` bulk-synchronous rounds over the simulated network.

    ``drop`` holds ``(worker_id, round)`` pairs whose VOTE is lost in
    transit; the server then times out that round and aborts everyone.
    With ``objective`` set, worker 0's pre-update iterate is recorded.
    """
    trace = SimTrace()
    net = _Network(trace)
    order_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    by_id = {w.worker_id: w for w in workers}
    drop = set(drop)

    def abort(k: int, reason: str) -> SimTrace:
        for wid in sorted(by_id):
            net.send("server", f"worker{wid}", Frame(MsgType.ABORT, wid, k, 0))
        list(net.drain())
        trace.aborted, trace.abort_round, trace.abort_reason = True, k, reason
        return trace

    for k in range(rounds):
        x_before = workers[0].x.copy() if objective is not None else None
        for pos, idx in enumerate(order_rng.permutation(len(workers))):
            w = workers[idx]
            frame = Frame.vote(w.worker_id, k, w.compute_vote(k))
            if (w.worker_id, k) in drop:
                continue
            net.send(f"worker{w.worker_id}", "server", frame, delay=1 + pos)

        broadcast = None
        try:
            for _, data in net.drain():
                f = decode_frame(data)
                trace.stats.record(f)
                if f.msg_type != MsgType.VOTE:
                    raise ProtocolError(f"server got unexpected {f.msg_type.name}")
                out = server.submit(f.worker_id, f.round, f.signs())
                if out is not None:
                    broadcast = out
        except (ProtocolError, FrameError, codec.MalformedPayload) as exc:
            return abort(k, str(exc))
        if broadcast is None:
            return abort(k, f"round timeout: {server.pending} of {server.n_workers} votes")

        for wid in sorted(by_id):
            net.send("server", f"worker{wid}", Frame.broadcast(wid, k, broadcast))
        for dst, data in net.drain():
            f = decode_frame(data)
            trace.stats.record(f)
            by_id[int(dst[len("worker"):])].apply(f.signs())
        if objective is not None:
            trace.records.append(make_record(k, objective, x_before, codec.unpack(broadcast), len(workers)))
        trace.rounds_completed = k + 1
    return trace
