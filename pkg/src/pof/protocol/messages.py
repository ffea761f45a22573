"""Wire messages and their binary encoding.

Frame: ``u32 length (LE) | version u8 | msg_type u8 | body``, where the
length counts everything after itself. Except for the verifier beacon, the
body is ``encrypt(pk_recipient, signature | payload)`` and the signature
covers ``msg_type | payload``.

Payload fields are little-endian: strings as ``u16 length + UTF-8``, byte
strings as ``u32 length + bytes``, times and rates as ``f64``. An RSS set is
``u32 count`` followed by ``count`` pairs of ``i32`` centi-dB and ``i64``
microseconds, so encodings are bit-exact on every platform.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..channel import RssTrace
from .crypto import SIG_LEN, CryptoProvider, KeyPair

VERSION = 1
_HEAD = struct.Struct("<IBB")
_SAMPLE = np.dtype([("cdb", "<i4"), ("us", "<i8")])


class FrameError(ValueError):
    """Bytes do not form a well-formed frame or payload."""


class MsgType(IntEnum):
    BEACON = 1
    JOIN_REQ = 2
    REPLY = 3
    RSS_REPORT = 4
    COMMIT = 5
    OPEN = 6


@dataclass(frozen=True, eq=False)
class Gamma:
    """Quantised RSS set: centi-dB values and microsecond timestamps."""

    cdb: np.ndarray
    us: np.ndarray

    def __post_init__(self):
        cdb = np.asarray(self.cdb, dtype=np.int32).reshape(-1)
        us = np.asarray(self.us, dtype=np.int64).reshape(-1)
        if len(cdb) != len(us):
            raise ValueError("value and timestamp counts differ")
        object.__setattr__(self, "cdb", cdb)
        object.__setattr__(self, "us", us)

    @classmethod
    def from_trace(cls, trace: RssTrace) -> Gamma:
        return cls(np.rint(trace.rss * 100.0), np.rint(trace.times * 1e6))

    def __len__(self) -> int:
        return len(self.cdb)

    def __eq__(self, other) -> bool:
        return isinstance(other, Gamma) and self.encode() == other.encode()

    def __hash__(self) -> int:
        return hash(self.encode())

    @property
    def rss(self) -> np.ndarray:
        return self.cdb / 100.0

    @property
    def times(self) -> np.ndarray:
        return self.us / 1e6

    def shifted(self, dt: float) -> Gamma:
        return Gamma(self.cdb, self.us + int(round(dt * 1e6)))

    def to_trace(self, rate: float, vehicle_id: str = "") -> RssTrace:
        return RssTrace(self.times, self.rss, rate, vehicle_id)

    def encode(self) -> bytes:
        arr = np.empty(len(self.cdb), dtype=_SAMPLE)
        arr["cdb"] = self.cdb
        arr["us"] = self.us
        return struct.pack("<I", len(arr)) + arr.tobytes()


@dataclass(frozen=True)
class Beacon:
    id: str
    public_key: bytes
    certificate: bytes
    TYPE = MsgType.BEACON


@dataclass(frozen=True)
class JoinReq:
    id: str
    public_key: bytes
    certificate: bytes
    TYPE = MsgType.JOIN_REQ


@dataclass(frozen=True)
class Reply:
    """Verifier's answer: collection window (verifier clock), probed frequency and rate."""

    id: str
    start_t: float
    end_t: float
    freq: str
    rate: float
    TYPE = MsgType.REPLY


@dataclass(frozen=True)
class RssReport:
    gamma: Gamma
    id: str
    TYPE = MsgType.RSS_REPORT


@dataclass(frozen=True)
class Commit:
    id: str
    c: bytes
    TYPE = MsgType.COMMIT


@dataclass(frozen=True)
class Open:
    gamma: Gamma
    id: str
    r: bytes
    TYPE = MsgType.OPEN


MESSAGE_CLASSES = {cls.TYPE: cls for cls in (Beacon, JoinReq, Reply, RssReport, Commit, Open)}


class _Writer:
    def __init__(self):
        self.parts = []

    def str(self, s: str):
        b = s.encode("utf-8")
        if len(b) > 0xFFFF:
            raise FrameError("string too long")
        self.parts.append(struct.pack("<H", len(b)) + b)

    def bytes(self, b: bytes):
        self.parts.append(struct.pack("<I", len(b)) + bytes(b))

    def f64(self, x: float):
        self.parts.append(struct.pack("<d", float(x)))

    def raw(self, b: bytes):
        self.parts.append(b)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FrameError("payload truncated")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def str(self) -> str:
        (n,) = struct.unpack("<H", self.take(2))
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FrameError(f"bad string: {exc}") from None

    def bytes(self) -> bytes:
        (n,) = struct.unpack("<I", self.take(4))
        return self.take(n)

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def gamma(self) -> Gamma:
        (n,) = struct.unpack("<I", self.take(4))
        arr = np.frombuffer(self.take(n * _SAMPLE.itemsize), dtype=_SAMPLE)
        return Gamma(arr["cdb"], arr["us"])

    def done(self):
        if self.pos != len(self.data):
            raise FrameError(f"{len(self.data) - self.pos} trailing bytes in payload")


def encode_payload(msg) -> bytes:
    w = _Writer()
    if isinstance(msg, (Beacon, JoinReq)):
        w.str(msg.id)
        w.bytes(msg.public_key)
        w.bytes(msg.certificate)
    elif isinstance(msg, Reply):
        w.str(msg.id)
        w.f64(msg.start_t)
        w.f64(msg.end_t)
        w.str(msg.freq)
        w.f64(msg.rate)
    elif isinstance(msg, RssReport):
        w.raw(msg.gamma.encode())
        w.str(msg.id)
    elif isinstance(msg, Commit):
        w.str(msg.id)
        w.bytes(msg.c)
    elif isinstance(msg, Open):
        w.raw(msg.gamma.encode())
        w.str(msg.id)
        w.bytes(msg.r)
    else:
        raise TypeError(f"not a protocol message: {msg!r}")
    return w.getvalue()


def decode_payload(msg_type: int, payload: bytes):
    r = _Reader(payload)
    if msg_type == MsgType.BEACON:
        msg = Beacon(r.str(), r.bytes(), r.bytes())
    elif msg_type == MsgType.JOIN_REQ:
        msg = JoinReq(r.str(), r.bytes(), r.bytes())
    elif msg_type == MsgType.REPLY:
        msg = Reply(r.str(), r.f64(), r.f64(), r.str(), r.f64())
    elif msg_type == MsgType.RSS_REPORT:
        msg = RssReport(r.gamma(), r.str())
    elif msg_type == MsgType.COMMIT:
        msg = Commit(r.str(), r.bytes())
    elif msg_type == MsgType.OPEN:
        msg = Open(r.gamma(), r.str(), r.bytes())
    else:
        raise FrameError(f"unknown message type {msg_type}")
    r.done()
    return msg


def encode_frame(msg_type: int, body: bytes) -> bytes:
    return _HEAD.pack(len(body) + 2, VERSION, int(msg_type)) + body


def decode_frame(frame: bytes) -> tuple[int, bytes]:
    """``(msg_type, body)`` of one complete frame."""
    if len(frame) < _HEAD.size:
        raise FrameError("frame shorter than its header")
    length, version, msg_type = _HEAD.unpack_from(frame)
    if length != len(frame) - 4:
        raise FrameError(f"length field {length} does not match frame size {len(frame) - 4}")
    if version != VERSION:
        raise FrameError(f"unsupported version {version}")
    if msg_type not in MESSAGE_CLASSES:
        raise FrameError(f"unknown message type {msg_type}")
    return msg_type, bytes(frame[_HEAD.size:])


def frame_type(frame: bytes) -> MsgType:
    return MsgType(decode_frame(frame)[0])


def seal(msg, sender: KeyPair, recipient_pk: bytes, crypto: CryptoProvider) -> bytes:
    """Sign the payload with the sender's key, then encrypt to the recipient."""
    payload = encode_payload(msg)
    sig = crypto.sign(sender.secret_key, bytes([msg.TYPE]) + payload)
    return encode_frame(msg.TYPE, crypto.encrypt(recipient_pk, sig + payload))


def plain_frame(msg) -> bytes:
    return encode_frame(msg.TYPE, encode_payload(msg))


@dataclass(frozen=True)
class Envelope:
    """Decrypted content of a sealed frame; the signature is not yet checked."""

    msg_type: MsgType
    signature: bytes
    payload: bytes
    msg: object

    def signed_by(self, public_key: bytes, crypto: CryptoProvider) -> bool:
        return crypto.verify(public_key, bytes([self.msg_type]) + self.payload, self.signature)


def unseal(frame: bytes, recipient: KeyPair, crypto: CryptoProvider) -> Envelope:
    """Decrypt a sealed frame. Raises DecryptionError or FrameError."""
    msg_type, body = decode_frame(frame)
    if msg_type == MsgType.BEACON:
        return Envelope(MsgType.BEACON, b"", body, decode_payload(msg_type, body))
    inner = crypto.decrypt(recipient.secret_key, body)
    if len(inner) < SIG_LEN:
        raise FrameError("sealed body shorter than a signature")
    sig, payload = inner[:SIG_LEN], inner[SIG_LEN:]
    return Envelope(MsgType(msg_type), sig, payload, decode_payload(msg_type, payload))
