"""Transports that carry encoded frames between consumers, the router,
and services.

Three interchangeable fabrics:

* `ThreadedNetwork` — in-process star topology; every entity gets a
  queue and a worker thread, frames flow through the router exactly as
  encoded bytes.
* `SequentialNetwork` — same topology, no threads: one global FIFO of
  pending deliveries pumped inside `exchange`, so a seeded run is fully
  deterministic down to message order.
* Socket classes — the same star over TCP with length-prefixed frames,
  used by the long-running CLI processes.

All fabrics keep a transcript of every frame the router touched, which
is what the eavesdropper and tamper tests inspect.
"""

from __future__ import annotations

import socket
import struct
import threading
from collections import deque
from dataclasses import dataclass
from queue import Empty, Queue
from typing import Callable, Optional

from .. import wire
from ..errors import CodecError, NamegateError, Timeout
from ..forwarder import Router
from ..names import Name
from ..wire import ContentObject, Interest

Handler = Callable[[Interest, float], ContentObject]

_STOP = object()


@dataclass(frozen=True)
class TranscriptEntry:
    src: str
    dst: str
    raw: bytes


class Transcript:
    """Append-only log of frames, safe to read while the realm runs."""

    def __init__(self) -> None:
        self._entries: list[TranscriptEntry] = []
        self._lock = threading.Lock()

    def add(self, src: str, dst: str, raw: bytes) -> None:
        with self._lock:
            self._entries.append(TranscriptEntry(src, dst, raw))

    def entries(self) -> list[TranscriptEntry]:
        with self._lock:
            return list(self._entries)

    def frames(self) -> list[bytes]:
        return [e.raw for e in self.entries()]

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class _PendingMap:
    """Name-keyed rendezvous between exchange() callers and deliveries."""

    def __init__(self) -> None:
        self._waiters: dict[str, list[Queue]] = {}
        self._lock = threading.Lock()

    def register(self, key: str) -> Queue:
        q: Queue = Queue()
        with self._lock:
            self._waiters.setdefault(key, []).append(q)
        return q

    def unregister(self, key: str, q: Queue) -> None:
        with self._lock:
            queues = self._waiters.get(key)
            if queues and q in queues:
                queues.remove(q)
                if not queues:
                    del self._waiters[key]

    def deliver(self, key: str, raw: bytes) -> int:
        with self._lock:
            queues = self._waiters.pop(key, [])
        for q in queues:
            q.put(raw)
        return len(queues)


def _decode_reply(raw: bytes, digest: str) -> ContentObject:
    msg = wire.decode(raw, digest)
    if not isinstance(msg, ContentObject):
        raise CodecError("expected a content object on the return path")
    return msg


# ---------------------------------------------------------------------------
# threaded in-process network

class _ConsumerFace:
    def __init__(self, network: "ThreadedNetwork", face: int, label: str):
        self._network = network
        self.face = face
        self.label = label
        self.pending = _PendingMap()

    def exchange(self, interest: Interest, timeout: float) -> ContentObject:
        raw = wire.encode(interest)
        key = interest.name.text
        q = self.pending.register(key)
        try:
            self._network.submit(self.face, raw)
            try:
                reply = q.get(timeout=timeout)
            except Empty:
                raise Timeout(f"no reply for {key} within {timeout}s")
        finally:
            self.pending.unregister(key, q)
        return _decode_reply(reply, self._network.digest)

    def deliver(self, raw: bytes) -> None:
        try:
            msg = wire.decode(raw, self._network.digest)
        except NamegateError:
            return
        self.pending.deliver(msg.name.text, raw)


class AttackerPort:
    """Raw frame access for adversary tests: inject anything, see
    everything the network delivers back to this face."""

    def __init__(self, submit: Callable[[bytes], None], label: str):
        self._submit = submit
        self.label = label
        self.inbox: Queue = Queue()

    def send_raw(self, raw: bytes) -> None:
        self._submit(raw)

    def recv_raw(self, timeout: float = 1.0) -> bytes:
        try:
            return self.inbox.get(timeout=timeout)
        except Empty:
            raise Timeout("nothing delivered to the attacker face")

    def exchange_raw(self, raw: bytes, timeout: float = 1.0) -> bytes:
        self.send_raw(raw)
        return self.recv_raw(timeout)

    def drain(self) -> list[bytes]:
        out = []
        while True:
            try:
                out.append(self.inbox.get_nowait())
            except Empty:
                return out

    def deliver(self, raw: bytes) -> None:
        self.inbox.put(raw)


class _ServiceWorker:
    def __init__(
        self,
        network: "ThreadedNetwork",
        face: int,
        label: str,
        handler: Handler,
    ):
        self.face = face
        self.label = label
        self.handler = handler
        self.inbox: Queue = Queue()
        self._network = network
        self.thread = threading.Thread(target=self._run, name=f"svc-{label}", daemon=True)

    def _run(self) -> None:
        while True:
            raw = self.inbox.get()
            if raw is _STOP:
                return
            try:
                msg = wire.decode(raw, self._network.digest)
            except NamegateError:
                continue  # undecodable frames die here
            if not isinstance(msg, Interest):
                continue
            reply = self.handler(msg, self._network.clock())
            self._network.submit(self.face, wire.encode(reply))

    def deliver(self, raw: bytes) -> None:
        self.inbox.put(raw)


class ThreadedNetwork:
    """Star topology over queues; the router runs single-threaded on its
    own worker so forwarder state needs no locks."""

    def __init__(
        self,
        clock: Callable[[], float],
        *,
        cs_capacity: int = 0,
        digest: str = wire.DEFAULT_DIGEST,
    ):
        self.clock = clock
        self.digest = digest
        self.transcript = Transcript()
        self.router = Router(self._route_send, cs_capacity=cs_capacity, digest=digest)
        self._faces: dict[int, object] = {}
        self._labels: dict[int, str] = {}
        self._next_face = 1
        self._inbox: Queue = Queue()
        self._thread = threading.Thread(target=self._run, name="router", daemon=True)
        self._started = False

    # -- wiring ----------------------------------------------------------

    def _new_face(self, label: str) -> int:
        face = self._next_face
        self._next_face += 1
        self._labels[face] = label
        return face

    def add_service(self, label: str, handler: Handler, prefixes: list[Name]):
        face = self._new_face(label)
        worker = _ServiceWorker(self, face, label, handler)
        self._faces[face] = worker
        for prefix in prefixes:
            self.router.add_route(prefix, face)
        if self._started:
            worker.thread.start()
        return worker

    def add_consumer(self, label: str) -> _ConsumerFace:
        face = self._new_face(label)
        port = _ConsumerFace(self, face, label)
        self._faces[face] = port
        return port

    def add_attacker(self, label: str = "attacker") -> AttackerPort:
        face = self._new_face(label)
        port = AttackerPort(lambda raw, f=face: self.submit(f, raw), label)
        self._faces[face] = port
        return port

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "ThreadedNetwork":
        if not self._started:
            self._started = True
            self._thread.start()
            for obj in self._faces.values():
                if isinstance(obj, _ServiceWorker):
                    obj.thread.start()
        return self

    def stop(self) -> None:
        if not self._started:
            return
        self._inbox.put(_STOP)
        self._thread.join(timeout=5)
        for obj in self._faces.values():
            if isinstance(obj, _ServiceWorker):
                obj.inbox.put(_STOP)
                obj.thread.join(timeout=5)
        self._started = False

    def __enter__(self) -> "ThreadedNetwork":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- frame movement ----------------------------------------------------

    def submit(self, face: int, raw: bytes) -> None:
        self._inbox.put((face, raw))

    def _run(self) -> None:
        while True:
            item = self._inbox.get()
            if item is _STOP:
                return
            face, raw = item
            self.transcript.add(self._labels.get(face, "?"), "router", raw)
            self.router.on_frame(face, raw, self.clock())

    def _route_send(self, face: int, raw: bytes) -> None:
        target = self._faces.get(face)
        if target is None:
            return
        self.transcript.add("router", self._labels.get(face, "?"), raw)
        target.deliver(raw)


# ---------------------------------------------------------------------------
# sequential deterministic network

class SequentialNetwork:
    """The same star with no concurrency at all: deliveries go into one
    FIFO which `exchange` pumps, so a seeded realm replays identically."""

    def __init__(
        self,
        clock: Callable[[], float],
        *,
        cs_capacity: int = 0,
        digest: str = wire.DEFAULT_DIGEST,
    ):
        self.clock = clock
        self.digest = digest
        self.transcript = Transcript()
        self.router = Router(self._route_send, cs_capacity=cs_capacity, digest=digest)
        self._events: deque[tuple[int, bytes]] = deque()
        self._handlers: dict[int, Handler] = {}
        self._consumers: dict[int, "_SequentialPort"] = {}
        self._attackers: dict[int, AttackerPort] = {}
        self._labels: dict[int, str] = {}
        self._next_face = 1
        self._service_faces: set[int] = set()

    def _new_face(self, label: str) -> int:
        face = self._next_face
        self._next_face += 1
        self._labels[face] = label
        return face

    def add_service(self, label: str, handler: Handler, prefixes: list[Name]) -> int:
        face = self._new_face(label)
        self._handlers[face] = handler
        self._service_faces.add(face)
        for prefix in prefixes:
            self.router.add_route(prefix, face)
        return face

    def add_consumer(self, label: str) -> "_SequentialPort":
        face = self._new_face(label)
        port = _SequentialPort(self, face, label)
        self._consumers[face] = port
        return port

    def add_attacker(self, label: str = "attacker") -> AttackerPort:
        face = self._new_face(label)
        port = AttackerPort(lambda raw, f=face: self.submit(f, raw), label)
        self._attackers[face] = port
        return port

    def start(self) -> "SequentialNetwork":
        return self

    def stop(self) -> None:
        self._events.clear()

    def __enter__(self) -> "SequentialNetwork":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    def submit(self, face: int, raw: bytes) -> None:
        self._events.append((face, raw))

    def pump(self) -> None:
        """Process queued frames in order until the network is quiet."""
        while self._events:
            face, raw = self._events.popleft()
            self.transcript.add(self._labels.get(face, "?"), "router", raw)
            self.router.on_frame(face, raw, self.clock())

    def _route_send(self, face: int, raw: bytes) -> None:
        self.transcript.add("router", self._labels.get(face, "?"), raw)
        if face in self._service_faces:
            self._run_service(face, raw)
        elif face in self._consumers:
            self._consumers[face].deliver(raw)
        elif face in self._attackers:
            self._attackers[face].deliver(raw)

    def _run_service(self, face: int, raw: bytes) -> None:
        try:
            msg = wire.decode(raw, self.digest)
        except NamegateError:
            return
        if not isinstance(msg, Interest):
            return
        reply = self._handlers[face](msg, self.clock())
        # the reply joins the same FIFO rather than jumping the queue
        self.submit(face, wire.encode(reply))


class _SequentialPort:
    def __init__(self, network: SequentialNetwork, face: int, label: str):
        self._network = network
        self.face = face
        self.label = label
        self._delivered: dict[str, deque[bytes]] = {}

    def deliver(self, raw: bytes) -> None:
        try:
            msg = wire.decode(raw, self._network.digest)
        except NamegateError:
            return
        self._delivered.setdefault(msg.name.text, deque()).append(raw)

    def exchange(self, interest: Interest, timeout: float) -> ContentObject:
        raw = wire.encode(interest)
        key = interest.name.text
        self._network.submit(self.face, raw)
        self._network.pump()
        bucket = self._delivered.get(key)
        if not bucket:
            raise Timeout(f"no reply for {key} (network is quiet)")
        reply = bucket.popleft()
        if not bucket:
            del self._delivered[key]
        return _decode_reply(reply, self._network.digest)


# ---------------------------------------------------------------------------
# TCP sockets

MAX_FRAME = 4 * 1024 * 1024
_LEN = struct.Struct(">I")


def write_frame(sock: socket.socket, raw: bytes) -> None:
    if len(raw) > MAX_FRAME:
        raise ValueError("frame too large")
    sock.sendall(_LEN.pack(len(raw)) + raw)


def read_frame(sock: socket.socket) -> Optional[bytes]:
    header = _read_exact(sock, _LEN.size)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    if length > MAX_FRAME:
        raise CodecError("oversized frame")
    return _read_exact(sock, length)


def _read_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class SocketService:
    """A service handler behind a listening TCP socket. Each connection
    carries framed interests in and framed replies out."""

    def __init__(
        self,
        handler: Handler,
        host: str = "127.0.0.1",
        port: int = 0,
        *,
        clock: Callable[[], float],
        digest: str = wire.DEFAULT_DIGEST,
    ):
        self._handler = handler
        self._clock = clock
        self._digest = digest
        self._listener = socket.create_server((host, port))
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="svc-accept", daemon=True
        )

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def start(self) -> "SocketService":
        self._accept_thread.start()
        return self

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._listener.close()
        except OSError:
            pass

    def __enter__(self) -> "SocketService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            t = threading.Thread(
                target=self._serve_conn, args=(conn,), name="svc-conn", daemon=True
            )
            t.start()
            self._threads.append(t)

    def _serve_conn(self, conn: socket.socket) -> None:
        write_lock = threading.Lock()
        with conn:
            while not self._stopping.is_set():
                try:
                    raw = read_frame(conn)
                except (OSError, CodecError):
                    return
                if raw is None:
                    return
                try:
                    msg = wire.decode(raw, self._digest)
                except NamegateError:
                    continue
                if not isinstance(msg, Interest):
                    continue
                reply = self._handler(msg, self._clock())
                try:
                    with write_lock:
                        write_frame(conn, wire.encode(reply))
                except OSError:
                    return


class SocketRouter:
    """The forwarder behind TCP: dials each service once, listens for
    consumers, and bridges frames between the two sides."""

    def __init__(
        self,
        *,
        listen: tuple[str, int] = ("127.0.0.1", 0),
        cs_capacity: int = 0,
        clock: Callable[[], float],
        digest: str = wire.DEFAULT_DIGEST,
    ):
        self._clock = clock
        self._digest = digest
        self.transcript = Transcript()
        self.router = Router(self._send, cs_capacity=cs_capacity, digest=digest)
        self._router_lock = threading.Lock()
        self._conns: dict[int, socket.socket] = {}
        self._write_locks: dict[int, threading.Lock] = {}
        self._labels: dict[int, str] = {}
        self._next_face = 1
        self._stopping = threading.Event()
        self._listener = socket.create_server(listen)
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="router-accept", daemon=True
        )

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def add_upstream(self, label: str, prefixes: list[Name], address: tuple[str, int]) -> None:
        conn = socket.create_connection(address, timeout=5)
        conn.settimeout(None)
        face = self._register(conn, label)
        for prefix in prefixes:
            self.router.add_route(prefix, face)
        threading.Thread(
            target=self._read_loop, args=(face, conn), name=f"up-{label}", daemon=True
        ).start()

    def _register(self, conn: socket.socket, label: str) -> int:
        face = self._next_face
        self._next_face += 1
        self._conns[face] = conn
        self._write_locks[face] = threading.Lock()
        self._labels[face] = label
        return face

    def start(self) -> "SocketRouter":
        self._accept_thread.start()
        return self

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._listener.close()
        except OSError:
            pass
        for conn in list(self._conns.values()):
            try:
                conn.close()
            except OSError:
                pass

    def __enter__(self) -> "SocketRouter":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, peer = self._listener.accept()
            except OSError:
                return
            face = self._register(conn, f"peer-{peer[0]}:{peer[1]}")
            threading.Thread(
                target=self._read_loop, args=(face, conn), name=f"face-{face}", daemon=True
            ).start()

    def _read_loop(self, face: int, conn: socket.socket) -> None:
        while not self._stopping.is_set():
            try:
                raw = read_frame(conn)
            except (OSError, CodecError):
                raw = None
            if raw is None:
                with self._router_lock:
                    self._conns.pop(face, None)
                return
            self.transcript.add(self._labels.get(face, "?"), "router", raw)
            with self._router_lock:
                self.router.on_frame(face, raw, self._clock())

    def _send(self, face: int, raw: bytes) -> None:
        conn = self._conns.get(face)
        if conn is None:
            return
        self.transcript.add("router", self._labels.get(face, "?"), raw)
        try:
            with self._write_locks[face]:
                write_frame(conn, raw)
        except OSError:
            pass


class SocketConsumerPort:
    """Client-side port that dials the router and multiplexes replies
    back to waiting exchange() calls by name."""

    def __init__(
        self,
        address: tuple[str, int],
        *,
        digest: str = wire.DEFAULT_DIGEST,
    ):
        self._digest = digest
        self._conn = socket.create_connection(address, timeout=5)
        self._conn.settimeout(None)
        self._write_lock = threading.Lock()
        self.pending = _PendingMap()
        self._reader = threading.Thread(
            target=self._read_loop, name="consumer-read", daemon=True
        )
        self._reader.start()

    def close(self) -> None:
        try:
            self._conn.close()
        except OSError:
            pass

    def __enter__(self) -> "SocketConsumerPort":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _read_loop(self) -> None:
        while True:
            try:
                raw = read_frame(self._conn)
            except (OSError, CodecError):
                return
            if raw is None:
                return
            try:
                msg = wire.decode(raw, self._digest)
            except NamegateError:
                continue
            self.pending.deliver(msg.name.text, raw)

    def exchange(self, interest: Interest, timeout: float) -> ContentObject:
        raw = wire.encode(interest)
        key = interest.name.text
        q = self.pending.register(key)
        try:
            with self._write_lock:
                write_frame(self._conn, raw)
            try:
                reply = q.get(timeout=timeout)
            except Empty:
                raise Timeout(f"no reply for {key} within {timeout}s")
        finally:
            self.pending.unregister(key, q)
        return _decode_reply(reply, self._digest)
