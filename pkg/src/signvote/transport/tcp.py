"""TCP transport: one server process, one connection per worker.

Session: the worker connects and sends HELLO (its id, model dim).  Each
round it sends one VOTE and blocks for the BROADCAST of that round.  Any
protocol violation, lost connection or round timeout makes the server send
ABORT to every connected worker and exit with a nonzero status.
"""
from __future__ import annotations

import logging
import socket
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .. import codec
from ..aggregation import ProtocolError, VoteServer
from .frames import (HEADER_SIZE, Frame, FrameError, MsgType, WireStats, decode_frame,
                     decode_header, encode_frame)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


class ConnectionLost(ConnectionError):
    pass


def parse_address(text: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        return default_host, int(text)
    return host or default_host, int(port)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks, got = [], 0
    while got < n:
        chunk = sock.recv(min(n - got, 1 << 20))
        if not chunk:
            raise ConnectionLost(f"peer closed after {got} of {n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> Frame:
    header = _recv_exact(sock, HEADER_SIZE)
    *_, length = decode_header(header)
    payload = _recv_exact(sock, length) if length else b""
    return decode_frame(header + payload)


def send_frame(sock: socket.socket, frame: Frame) -> None:
    sock.sendall(encode_frame(frame))


@dataclass
class ServerReport:
    exit_status: int
    rounds_completed: int
    stats: WireStats = field(default_factory=WireStats)
    abort_reason: str = ""


class TcpServer:
    """Parameter server bound to ``bind_addr``; call :meth:`serve` to run it."""

    def __init__(self, bind_addr: tuple[str, int], n_workers: int, rounds: int, dim: int,
                 timeout: float = DEFAULT_TIMEOUT):
        self.n_workers, self.rounds, self.dim, self.timeout = n_workers, rounds, dim, timeout
        self.votes = VoteServer(n_workers, dim)
        self.stats = WireStats()
        self._listener = socket.create_server(bind_addr)
        self.address = self._listener.getsockname()[:2]
        self._conns: dict[int, socket.socket] = {}
        self._send_lock = threading.Lock()
        self._progress = threading.Condition()
        self._error: str | None = None
        self._finished = False

    def _fail(self, reason: str) -> None:
        with self._progress:
            if self._error is None and not self._finished:
                self._error = reason
            self._progress.notify_all()

    def _accept_all(self) -> None:
        self._listener.settimeout(self.timeout)
        pending = []
        try:
            while len(self._conns) < self.n_workers:
                conn, _ = self._listener.accept()
                pending.append(conn)
                conn.settimeout(self.timeout)
                hello = read_frame(conn)
                if hello.msg_type != MsgType.HELLO:
                    raise ProtocolError(f"expected HELLO, got {hello.msg_type.name}")
                if hello.worker_id in self._conns or hello.worker_id >= self.n_workers:
                    raise ProtocolError(f"bad or duplicate worker id {hello.worker_id}")
                if hello.dim != self.dim:
                    raise ProtocolError(f"worker {hello.worker_id} has dim {hello.dim}, expected {self.dim}")
                self.stats.record(hello)
                conn.settimeout(None)
                self._conns[hello.worker_id] = conn
        except socket.timeout:
            self._error = f"timed out waiting for workers ({len(self._conns)} of {self.n_workers} joined)"
        except (ProtocolError, FrameError, ConnectionLost, OSError) as exc:
            self._error = str(exc)
        for conn in pending:
            if conn not in self._conns.values():
                self._abort_socket(conn, 0xFFFF)

    def _abort_socket(self, conn: socket.socket, worker_id: int) -> None:
        try:
            send_frame(conn, Frame(MsgType.ABORT, min(worker_id, 0xFFFF), self.votes.round, 0))
        except OSError:
            pass
        conn.close()

    def _reader(self, worker_id: int, conn: socket.socket) -> None:
        try:
            while True:
                frame = read_frame(conn)
                self.stats.record(frame)
                if frame.msg_type != MsgType.VOTE:
                    raise ProtocolError(f"worker {worker_id} sent {frame.msg_type.name} mid-session")
                if frame.worker_id != worker_id:
                    raise ProtocolError(f"connection of worker {worker_id} voted as {frame.worker_id}")
                out = self.votes.submit(worker_id, frame.round, frame.signs())
                if out is not None:
                    self._broadcast(frame.round, out)
        except ConnectionLost as exc:
            if not self._done():
                self._fail(f"connection to worker {worker_id} lost: {exc}")
        except (ProtocolError, FrameError, codec.MalformedPayload) as exc:
            self._fail(str(exc))
        except OSError as exc:
            if not self._done():
                self._fail(f"worker {worker_id}: {exc}")

    def _done(self) -> bool:
        with self._progress:
            return self._finished or self._error is not None

    def _broadcast(self, k: int, sv: codec.SignVector) -> None:
        # Mark the run finished before the last send so workers hanging up are not faults.
        with self._progress:
            if self.votes.round >= self.rounds:
                self._finished = True
        with self._send_lock:
            for wid, conn in sorted(self._conns.items()):
                frame = Frame.broadcast(wid, k, sv)
                send_frame(conn, frame)
                self.stats.record(frame)
        with self._progress:
            self._progress.notify_all()

    def serve(self) -> ServerReport:
        try:
            self._accept_all()
            if self._error is None and self.rounds > 0:
                threads = [threading.Thread(target=self._reader, args=(wid, c), daemon=True)
                           for wid, c in self._conns.items()]
                for t in threads:
                    t.start()
                self._wait_rounds()
        finally:
            self._listener.close()
        if self._error is not None:
            log.warning("aborting run: %s", self._error)
            with self._send_lock:
                for wid, conn in self._conns.items():
                    self._abort_socket(conn, wid)
            return ServerReport(1, self.votes.round, self.stats, self._error)
        with self._send_lock:
            for conn in self._conns.values():
                conn.close()
        return ServerReport(0, self.votes.round, self.stats)

    def _wait_rounds(self) -> None:
        with self._progress:
            seen, deadline = self.votes.round, time.monotonic() + self.timeout
            while not self._finished and self._error is None:
                left = deadline - time.monotonic()
                if left <= 0:
                    self._error = f"round {seen} timed out after {self.timeout}s"
                    break
                self._progress.wait(left)
                if self.votes.round != seen:
                    seen, deadline = self.votes.round, time.monotonic() + self.timeout


def run_server(bind_addr, n_workers: int, rounds: int, dim: int, timeout: float = DEFAULT_TIMEOUT) -> ServerReport:
    if isinstance(bind_addr, str):
        bind_addr = parse_address(bind_addr)
    return TcpServer(bind_addr, n_workers, rounds, dim, timeout).serve()


@dataclass
class WorkerReport:
    exit_status: int
    updates: int
    x: np.ndarray
    reason: str = ""


def run_worker(server_addr, worker, rounds: int, timeout: float = DEFAULT_TIMEOUT,
               on_round=None, connect_retry: float = 5.0) -> WorkerReport:
    """Drive ``worker`` through ``rounds`` rounds against a TCP server.

    ``on_round(k, x_before, broadcast)`` is called before each update is applied.
    """
    if isinstance(server_addr, str):
        server_addr = parse_address(server_addr)
    deadline = time.monotonic() + connect_retry
    while True:
        try:
            sock = socket.create_connection(server_addr, timeout=timeout)
            break
        except ConnectionRefusedError:
            if time.monotonic() > deadline:
                return WorkerReport(1, worker.updates, worker.x, "connection refused")
            time.sleep(0.05)
    try:
        send_frame(sock, Frame(MsgType.HELLO, worker.worker_id, 0, worker.dim))
        for k in range(rounds):
            send_frame(sock, Frame.vote(worker.worker_id, k, worker.compute_vote(k)))
            reply = read_frame(sock)
            if reply.msg_type == MsgType.ABORT:
                return WorkerReport(1, worker.updates, worker.x, f"server aborted in round {reply.round}")
            if reply.msg_type != MsgType.BROADCAST or reply.round != k:
                return WorkerReport(1, worker.updates, worker.x,
                                    f"expected BROADCAST for round {k}, got {reply.msg_type.name} round {reply.round}")
            sv = reply.signs()
            if on_round is not None:
                on_round(k, worker.x.copy(), sv)
            worker.apply(sv)
    except (FrameError, ConnectionLost, OSError) as exc:
        return WorkerReport(1, worker.updates, worker.x, str(exc))
    finally:
        sock.close()
    return WorkerReport(0, worker.updates, worker.x)
