"""Byte channels between the master and its workers.

Both transports move encoded frames; the in-process one just hands the bytes
to a local worker function, so arithmetic is identical to the TCP path.
"""
import logging
import socket
import struct
import time

from ..errors import ConfigError, ProtocolError, RoundError
from . import wire
from .protocol import worker_step

log = logging.getLogger(__name__)

_HELLO = struct.Struct("<I")


def parse_address(addr):
    host, sep, port = str(addr).rpartition(":")
    if not sep or not port.isdigit() or int(port) > 65535:
        raise ConfigError(f"address must look like host:port, got {addr!r}")
    return (host or "127.0.0.1", int(port))


class InProcessTransport:
    def __init__(self, shards):
        """``shards`` maps worker_id -> Shard."""
        self._shards = dict(shards)
        self.worker_ids = tuple(sorted(self._shards))

    def exchange(self, broadcast):
        frame = wire.encode(broadcast)
        out = []
        for wid in self.worker_ids:
            reply = wire.encode(worker_step(self._shards[wid], wire.decode(frame), wid))
            out.append((wire.decode(reply), len(frame), len(reply)))
        return out

    def close(self):
        pass


def _recv_exact(sock, n):
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            if got == 0 and not chunks:
                return None
            raise ProtocolError(f"connection closed after {got} of {n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock):
    """Read one complete frame; ``None`` on a clean EOF at a frame boundary."""
    prefix = _recv_exact(sock, 6)
    if prefix is None:
        return None
    rest = _recv_exact(sock, wire.header_size(prefix) - 6)
    if rest is None:
        raise ProtocolError("connection closed inside a frame header")
    header = prefix + rest
    size = wire.payload_size(header)
    payload = _recv_exact(sock, size) if size else b""
    if payload is None:
        raise ProtocolError("connection closed before payload")
    return header + payload


class TcpMasterTransport:
    """Master side: listens, accepts one persistent connection per worker."""

    def __init__(self, address, worker_ids, timeout=60.0):
        self.worker_ids = tuple(sorted(worker_ids))
        self.timeout = float(timeout)
        self._listener = socket.create_server(parse_address(address))
        self._conns = {}

    @property
    def address(self):
        host, port = self._listener.getsockname()[:2]
        return f"{host}:{port}"

    def accept_workers(self):
        deadline = time.monotonic() + self.timeout
        while len(self._conns) < len(self.worker_ids):
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                missing = sorted(set(self.worker_ids) - set(self._conns))
                raise RoundError(f"workers {missing} never connected", missing=missing)
            self._listener.settimeout(remaining)
            try:
                conn, peer = self._listener.accept()
            except socket.timeout:
                continue
            conn.settimeout(remaining)
            hello = _recv_exact(conn, _HELLO.size)
            if hello is None:
                conn.close()
                continue
            (wid,) = _HELLO.unpack(hello)
            if wid not in self.worker_ids or wid in self._conns:
                conn.close()
                raise ProtocolError(f"unexpected or duplicate hello from worker {wid}")
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._conns[wid] = conn
            log.debug("worker %d connected from %s", wid, peer)

    def exchange(self, broadcast):
        if len(self._conns) < len(self.worker_ids):
            self.accept_workers()
        frame = wire.encode(broadcast)
        for wid in self.worker_ids:
            self._conns[wid].sendall(frame)
        deadline = time.monotonic() + self.timeout
        out, missing = [], []
        for wid in self.worker_ids:
            conn = self._conns[wid]
            conn.settimeout(max(deadline - time.monotonic(), 1e-3))
            try:
                raw = read_frame(conn)
            except (socket.timeout, ProtocolError, OSError):
                raw = None
            if raw is None:
                missing.append(wid)
                continue
            msg = wire.decode(raw)
            if msg.worker_id != wid:
                raise ProtocolError(
                    f"connection of worker {wid} carried a reply tagged {msg.worker_id}",
                    round=broadcast.round,
                )
            out.append((msg, len(frame), len(raw)))
        if missing:
            raise RoundError(f"no reply from workers {missing}", missing=missing, round=broadcast.round)
        return out

    def close(self):
        for conn in self._conns.values():
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()
        self._conns.clear()
        self._listener.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def run_worker(address, worker_id, shard, connect_timeout=30.0):
    """Worker loop: connect, say hello, answer broadcasts until the master hangs up.

    Returns the number of rounds served.
    """
    target = parse_address(address)
    deadline = time.monotonic() + connect_timeout
    while True:
        try:
            sock = socket.create_connection(target, timeout=connect_timeout)
            break
        except OSError:
            if time.monotonic() >= deadline:
                raise
            time.sleep(0.05)
    served = 0
    with sock:
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.sendall(_HELLO.pack(worker_id))
        while True:
            try:
                raw = read_frame(sock)
            except ConnectionResetError:
                break
            if raw is None:
                break
            msg = wire.decode(raw)
            if not isinstance(msg, wire.BroadcastMsg):
                raise ProtocolError(f"worker {worker_id} received a non-broadcast frame")
            sock.sendall(wire.encode(worker_step(shard, msg, worker_id)))
            served += 1
    return served
