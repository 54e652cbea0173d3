"""Binary framing for the master/worker messages ("TWT1", little-endian).

Broadcast:  magic(4) version(1) type=0x01(1) round(u32) count(u32)
            count x u32 indices, count x f64 values
Gradient:   magic(4) version(1) type=0x02(1) round(u32) worker_id(u32) length(u32)
            length x f64 values
"""
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import DecodeError, ProtocolError

MAGIC = b"TWT1"
VERSION = 0x01
TYPE_BROADCAST = 0x01
TYPE_GRADIENT = 0x02

_PREFIX = struct.Struct("<4sBB")
_BCAST_HEAD = struct.Struct("<4sBBII")
_GRAD_HEAD = struct.Struct("<4sBBIII")
_U32_MAX = 0xFFFFFFFF


@dataclass(frozen=True, eq=False)
class BroadcastMsg:
    round: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.uint32).reshape(-1)
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if idx.shape != vals.shape:
            raise ProtocolError(f"broadcast has {idx.size} indices but {vals.size} values")
        if idx.size > 1 and np.any(idx[1:] <= idx[:-1]):
            raise ProtocolError("broadcast indices must be strictly increasing")
        if not 0 <= self.round <= _U32_MAX:
            raise ProtocolError("round out of u32 range")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        if not isinstance(other, BroadcastMsg):
            return NotImplemented
        return (self.round == other.round and np.array_equal(self.indices, other.indices)
                and self.values.tobytes() == other.values.tobytes())

    def __len__(self):
        return int(self.indices.size)


@dataclass(frozen=True, eq=False)
class GradientMsg:
    round: int
    worker_id: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not (0 <= self.round <= _U32_MAX and 0 <= self.worker_id <= _U32_MAX):
            raise ProtocolError("round/worker_id out of u32 range")
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        if not isinstance(other, GradientMsg):
            return NotImplemented
        return (self.round == other.round and self.worker_id == other.worker_id
                and self.values.tobytes() == other.values.tobytes())

    def __len__(self):
        return int(self.values.size)


def encode(msg):
    if isinstance(msg, BroadcastMsg):
        head = _BCAST_HEAD.pack(MAGIC, VERSION, TYPE_BROADCAST, msg.round, len(msg))
        return head + msg.indices.astype("<u4").tobytes() + msg.values.astype("<f8").tobytes()
    if isinstance(msg, GradientMsg):
        head = _GRAD_HEAD.pack(MAGIC, VERSION, TYPE_GRADIENT, msg.round, msg.worker_id, len(msg))
        return head + msg.values.astype("<f8").tobytes()
    raise ProtocolError(f"cannot encode {type(msg).__name__}")


def header_size(prefix):
    """Full header length given the first 6 bytes; validates magic/version/type."""
    _check_prefix(prefix)
    return _BCAST_HEAD.size if prefix[5] == TYPE_BROADCAST else _GRAD_HEAD.size


def payload_size(header):
    """Payload byte count declared by a complete header."""
    if header[5] == TYPE_BROADCAST:
        count = _BCAST_HEAD.unpack_from(header)[4]
        return 12 * count
    length = _GRAD_HEAD.unpack_from(header)[5]
    return 8 * length


def _check_prefix(buf):
    if len(buf) < _PREFIX.size:
        # report the first byte that is missing or wrong
        for i, b in enumerate(buf[:4]):
            if b != MAGIC[i]:
                raise DecodeError("bad magic", i)
        raise DecodeError("truncated header", len(buf))
    for i in range(4):
        if buf[i] != MAGIC[i]:
            raise DecodeError("bad magic", i)
    if buf[4] != VERSION:
        raise DecodeError(f"unsupported version {buf[4]:#04x}", 4)
    if buf[5] not in (TYPE_BROADCAST, TYPE_GRADIENT):
        raise DecodeError(f"unknown message type {buf[5]:#04x}", 5)


def decode(buf):
    buf = bytes(buf)
    _check_prefix(buf)
    kind = buf[5]
    head = _BCAST_HEAD if kind == TYPE_BROADCAST else _GRAD_HEAD
    if len(buf) < head.size:
        raise DecodeError("truncated header", len(buf))
    fields = head.unpack_from(buf)
    off = head.size
    if kind == TYPE_BROADCAST:
        _, _, _, rnd, count = fields
        end = off + 12 * count
        if len(buf) < end:
            raise DecodeError(f"truncated payload: expected {end} bytes", len(buf))
        if len(buf) > end:
            raise DecodeError("trailing bytes after payload", end)
        idx = np.frombuffer(buf, dtype="<u4", count=count, offset=off)
        vals = np.frombuffer(buf, dtype="<f8", count=count, offset=off + 4 * count)
        if count > 1 and np.any(idx[1:] <= idx[:-1]):
            bad = int(np.flatnonzero(idx[1:] <= idx[:-1])[0]) + 1
            raise DecodeError("indices not strictly increasing", off + 4 * bad)
        return BroadcastMsg(rnd, idx.astype(np.uint32), vals.astype(np.float64))
    _, _, _, rnd, wid, length = fields
    end = off + 8 * length
    if len(buf) < end:
        raise DecodeError(f"truncated payload: expected {end} bytes", len(buf))
    if len(buf) > end:
        raise DecodeError("trailing bytes after payload", end)
    vals = np.frombuffer(buf, dtype="<f8", count=length, offset=off)
    return GradientMsg(rnd, wid, vals.astype(np.float64))
