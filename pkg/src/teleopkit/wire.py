"""Framed binary wire protocol for the robot I/O server.

Frame layout (all integers little-endian):

    magic   4 bytes  'L' 'F' 'R' 'X'
    version u8       = 1
    type    u8       message type
    reserved u16     = 0
    len     u32      payload byte length, at most 65536
    payload len bytes

Message payloads:

    0x01 HELLO      role u8 (1 commander, 2 observer), state_rate_hz u16
    0x02 COMMAND    timestamp_us u64, n u8 = 19, targets 19 x f64
    0x03 STATE      timestamp_us u64, n u8 = 19, q 19 x f64, dq 19 x f64
    0x04 HEARTBEAT  timestamp_us u64
    0x05 ERROR      code u16, utf-8 text
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"LFRX"
VERSION = 1
HEADER = struct.Struct("<4sBBHI")
MAX_PAYLOAD = 65536

T_HELLO = 0x01
T_COMMAND = 0x02
T_STATE = 0x03
T_HEARTBEAT = 0x04
T_ERROR = 0x05

ROLE_COMMANDER = 1
ROLE_OBSERVER = 2

N_JOINTS = 19

ERR_COMMANDER_OCCUPIED = 1
ERR_MALFORMED = 2

_HELLO = struct.Struct("<BH")
_COMMAND = struct.Struct("<QB19d")
_STATE = struct.Struct("<QB38d")
_HEARTBEAT = struct.Struct("<Q")
_ERROR_HEAD = struct.Struct("<H")


class WireError(ValueError):
    def __init__(self, code: str, detail: str, offset: int | None = None):
        self.code = code
        self.detail = detail
        self.offset = offset
        at = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{code}{at}: {detail}")


@dataclass(frozen=True)
class Hello:
    role: int
    state_rate_hz: int


@dataclass(frozen=True)
class Command:
    timestamp_us: int
    targets: tuple

    def target_array(self) -> np.ndarray:
        return np.asarray(self.targets, dtype=float)


@dataclass(frozen=True)
class State:
    timestamp_us: int
    q: tuple
    dq: tuple


@dataclass(frozen=True)
class Heartbeat:
    timestamp_us: int


@dataclass(frozen=True)
class Error:
    code: int
    text: str


Message = Hello | Command | State | Heartbeat | Error


def encode(msg: Message) -> bytes:
    if isinstance(msg, Hello):
        mtype, payload = T_HELLO, _HELLO.pack(msg.role, msg.state_rate_hz)
    elif isinstance(msg, Command):
        targets = [float(v) for v in msg.targets]
        if len(targets) != N_JOINTS:
            raise WireError("MALFORMED", f"command needs {N_JOINTS} targets, got {len(targets)}")
        if not all(np.isfinite(targets)):
            raise WireError("MALFORMED", "command targets must be finite")
        mtype, payload = T_COMMAND, _COMMAND.pack(msg.timestamp_us, N_JOINTS, *targets)
    elif isinstance(msg, State):
        q = [float(v) for v in msg.q]
        dq = [float(v) for v in msg.dq]
        if len(q) != N_JOINTS or len(dq) != N_JOINTS:
            raise WireError("MALFORMED", f"state needs {N_JOINTS} q and dq entries")
        mtype, payload = T_STATE, _STATE.pack(msg.timestamp_us, N_JOINTS, *q, *dq)
    elif isinstance(msg, Heartbeat):
        mtype, payload = T_HEARTBEAT, _HEARTBEAT.pack(msg.timestamp_us)
    elif isinstance(msg, Error):
        text = msg.text.encode("utf-8")
        mtype, payload = T_ERROR, _ERROR_HEAD.pack(msg.code) + text
    else:
        raise WireError("UNKNOWN_TYPE", f"cannot encode {type(msg).__name__}")
    return HEADER.pack(MAGIC, VERSION, mtype, 0, len(payload)) + payload


def _parse_payload(mtype: int, payload: bytes, offset: int) -> Message:
    try:
        if mtype == T_HELLO:
            role, rate = _HELLO.unpack(payload)
            if role not in (ROLE_COMMANDER, ROLE_OBSERVER):
                raise WireError("MALFORMED", f"unknown role {role}", offset)
            return Hello(role, rate)
        if mtype == T_COMMAND:
            vals = _COMMAND.unpack(payload)
            if vals[1] != N_JOINTS:
                raise WireError("MALFORMED", f"command n_joints {vals[1]} != {N_JOINTS}", offset)
            return Command(vals[0], tuple(vals[2:]))
        if mtype == T_STATE:
            vals = _STATE.unpack(payload)
            if vals[1] != N_JOINTS:
                raise WireError("MALFORMED", f"state n {vals[1]} != {N_JOINTS}", offset)
            return State(vals[0], tuple(vals[2:2 + N_JOINTS]), tuple(vals[2 + N_JOINTS:]))
        if mtype == T_HEARTBEAT:
            return Heartbeat(_HEARTBEAT.unpack(payload)[0])
        if mtype == T_ERROR:
            (code,) = _ERROR_HEAD.unpack(payload[:2])
            return Error(code, payload[2:].decode("utf-8"))
    except struct.error as exc:
        raise WireError("MALFORMED", f"payload does not fit type 0x{mtype:02x}: {exc}", offset) from None
    raise WireError("UNKNOWN_TYPE", f"message type 0x{mtype:02x}", offset)


def decode(data: bytes) -> Message:
    """Decode exactly one complete frame."""
    msg, used = decode_prefix(data, 0)
    if msg is None:
        raise WireError("MALFORMED", "truncated frame", 0)
    if used != len(data):
        raise WireError("MALFORMED", f"{len(data) - used} trailing bytes", used)
    return msg


def decode_prefix(data: bytes, offset: int = 0):
    """Decode one frame starting at offset; (None, offset) if incomplete."""
    if len(data) - offset < HEADER.size:
        return None, offset
    magic, version, mtype, reserved, length = HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise WireError("MALFORMED", f"bad magic {magic!r}", offset)
    if version != VERSION:
        raise WireError("UNSUPPORTED_VERSION", f"version {version}", offset)
    if length > MAX_PAYLOAD:
        raise WireError("MALFORMED", f"payload length {length} exceeds {MAX_PAYLOAD}", offset)
    end = offset + HEADER.size + length
    if len(data) < end:
        return None, offset
    msg = _parse_payload(mtype, data[offset + HEADER.size:end], offset)
    return msg, end


class FrameDecoder:
    """Incremental decoder: feed arbitrary chunks, get complete messages.

    The protocol is self-delimiting: any split of a byte stream into chunks
    yields the same message sequence plus at most one trailing partial frame.
    """

    def __init__(self):
        self._buf = bytearray()
        self.consumed = 0  # total bytes fully parsed, for error offsets

    def feed(self, chunk: bytes) -> list[Message]:
        self._buf.extend(chunk)
        out = []
        pos = 0
        while True:
            try:
                msg, end = decode_prefix(self._buf, pos)
            except WireError as exc:
                raise WireError(exc.code, exc.detail,
                                self.consumed + (exc.offset or 0)) from None
            if msg is None:
                break
            out.append(msg)
            pos = end
        del self._buf[:pos]
        self.consumed += pos
        return out

    @property
    def pending(self) -> int:
        return len(self._buf)
