"""Bit-exact wire frames.

Header (20 bytes, little-endian)::

    magic    4s   b"SGNV"
    version  u8   1
    msg_type u8   HELLO=0, VOTE=1, BROADCAST=2, ABORT=3
    worker   u16
    round    u32
    dim      u32
    length   u32  payload bytes that follow

VOTE and BROADCAST carry a packed sign vector (``length == ceil(dim / 8)``);
HELLO and ABORT carry no payload.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from ..codec import MalformedPayload, SignVector, payload_size

MAGIC = b"SGNV"
VERSION = 1
HEADER = struct.Struct("<4sBBHIII")
HEADER_SIZE = HEADER.size
MAX_U32 = 2**32 - 1


class FrameError(ValueError):
    pass


class BadMagic(FrameError):
    pass


class VersionMismatch(FrameError):
    pass


class TruncatedFrame(FrameError):
    pass


class MsgType(enum.IntEnum):
    HELLO = 0
    VOTE = 1
    BROADCAST = 2
    ABORT = 3


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    worker_id: int
    round: int
    dim: int
    payload: bytes = b""

    @classmethod
    def vote(cls, worker_id: int, round: int, sv: SignVector) -> "Frame":
        return cls(MsgType.VOTE, worker_id, round, sv.dim, sv.payload)

    @classmethod
    def broadcast(cls, worker_id: int, round: int, sv: SignVector) -> "Frame":
        return cls(MsgType.BROADCAST, worker_id, round, sv.dim, sv.payload)

    def signs(self) -> SignVector:
        if self.msg_type not in (MsgType.VOTE, MsgType.BROADCAST):
            raise FrameError(f"{self.msg_type.name} frame carries no sign vector")
        return SignVector(self.dim, self.payload)


def _expected_length(msg_type: MsgType, dim: int) -> int:
    return payload_size(dim) if msg_type in (MsgType.VOTE, MsgType.BROADCAST) else 0


def _validate(f: Frame) -> None:
    if not 0 <= f.worker_id <= 0xFFFF:
        raise FrameError(f"worker id {f.worker_id} does not fit in u16")
    if not 0 <= f.round <= MAX_U32:
        raise FrameError(f"round {f.round} does not fit in u32")
    if not 0 <= f.dim <= MAX_U32:
        raise FrameError(f"dim {f.dim} exceeds 2^32 - 1")
    expected = _expected_length(f.msg_type, f.dim)
    if len(f.payload) != expected:
        raise FrameError(f"{f.msg_type.name} frame with dim {f.dim} needs {expected} payload bytes, has {len(f.payload)}")
    if expected:
        if f.dim == 0:
            raise FrameError(f"{f.msg_type.name} frame needs dim >= 1")
        try:
            SignVector(f.dim, f.payload)
        except MalformedPayload as exc:
            raise FrameError(str(exc)) from exc


def encode_frame(f: Frame) -> bytes:
    _validate(f)
    return HEADER.pack(MAGIC, VERSION, int(f.msg_type), f.worker_id, f.round, f.dim, len(f.payload)) + f.payload


def decode_header(buf: bytes) -> tuple[MsgType, int, int, int, int]:
    if len(buf) < HEADER_SIZE:
        raise TruncatedFrame(f"header needs {HEADER_SIZE} bytes, got {len(buf)}")
    magic, version, msg_type, worker_id, round, dim, length = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"frame version {version}, expected {VERSION}")
    try:
        mt = MsgType(msg_type)
    except ValueError:
        raise FrameError(f"unknown message type {msg_type}") from None
    if length != _expected_length(mt, dim):
        raise FrameError(f"payload length {length} inconsistent with {mt.name} dim {dim}")
    return mt, worker_id, round, dim, length


def decode_frame(buf: bytes) -> Frame:
    mt, worker_id, round, dim, length = decode_header(buf)
    if len(buf) < HEADER_SIZE + length:
        raise TruncatedFrame(f"payload needs {length} bytes, got {len(buf) - HEADER_SIZE}")
    if len(buf) > HEADER_SIZE + length:
        raise FrameError(f"{len(buf) - HEADER_SIZE - length} trailing bytes after frame")
    f = Frame(mt, worker_id, round, dim, bytes(buf[HEADER_SIZE:]))
    _validate(f)
    return f


@dataclass
class WireStats:
    """Byte and bit counts for frames seen by the server, both directions."""

    frames: int = 0
    header_bytes: int = 0
    vote_payload_bytes: list[int] = field(default_factory=list)
    broadcast_payload_bytes: list[int] = field(default_factory=list)
    sign_bits: int = 0

    def record(self, f: Frame) -> None:
        self.frames += 1
        self.header_bytes += HEADER_SIZE
        if f.msg_type == MsgType.VOTE:
            self.vote_payload_bytes.append(len(f.payload))
            self.sign_bits += f.dim
        elif f.msg_type == MsgType.BROADCAST:
            self.broadcast_payload_bytes.append(len(f.payload))
            self.sign_bits += f.dim

    @property
    def payload_bytes(self) -> int:
        return sum(self.vote_payload_bytes) + sum(self.broadcast_payload_bytes)
