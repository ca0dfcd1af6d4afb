"""Name-based forwarding: FIB longest-prefix match, PIT aggregation with
reverse-path delivery, and a bounded LRU content store honoring expiry.

The router never rewrites traffic: frames are forwarded byte-identical to
how they arrived. Decoding happens only to learn the name and type. A
router instance is single-threaded by contract; the owning transport must
serialize calls into it (multiple router instances may run concurrently).
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Optional

from . import wire
from .errors import NamegateError
from .names import Name

FaceId = int


class Fib:
    """Prefix -> outgoing face, longest segment-wise prefix wins."""

    def __init__(self) -> None:
        self._entries: dict[tuple[str, ...], FaceId] = {}

    def add(self, prefix: Name, face: FaceId) -> None:
        self._entries[prefix.segments] = face

    def lookup(self, name: Name) -> Optional[FaceId]:
        segs = name.segments
        for k in range(len(segs), 0, -1):
            face = self._entries.get(segs[:k])
            if face is not None:
                return face
        return None

    def entries(self) -> dict[tuple[str, ...], FaceId]:
        return dict(self._entries)


class Pit:
    """Pending interests: full name -> incoming faces, insertion-ordered."""

    def __init__(self) -> None:
        self._entries: dict[tuple[str, ...], list[FaceId]] = {}

    def add(self, name: Name, face: FaceId) -> bool:
        """Record a face; returns True iff this created a new entry."""
        faces = self._entries.get(name.segments)
        if faces is None:
            self._entries[name.segments] = [face]
            return True
        if face not in faces:
            faces.append(face)
        return False

    def take(self, name: Name) -> list[FaceId]:
        """Remove and return the entry's faces ([] if none pending)."""
        return self._entries.pop(name.segments, [])

    def __len__(self) -> int:
        return len(self._entries)

    def has(self, name: Name) -> bool:
        return name.segments in self._entries


@dataclass
class _CsEntry:
    raw: bytes
    expires_at: int


class ContentStore:
    """Bounded LRU cache of content frames; never stores non-cacheable or
    already-expired objects, never serves expired ones."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._entries: "OrderedDict[tuple[str, ...], _CsEntry]" = OrderedDict()

    def get(self, name: Name, now: float) -> Optional[bytes]:
        entry = self._entries.get(name.segments)
        if entry is None:
            return None
        if entry.expires_at <= now:
            del self._entries[name.segments]
            return None
        self._entries.move_to_end(name.segments)
        return entry.raw

    def put(self, name: Name, raw: bytes, expiry_time: int, now: float) -> bool:
        if self.capacity <= 0 or expiry_time == 0 or expiry_time <= now:
            return False
        self._entries[name.segments] = _CsEntry(raw, expiry_time)
        self._entries.move_to_end(name.segments)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)
        return True

    def evict_expired(self, now: float) -> int:
        dead = [k for k, e in self._entries.items() if e.expires_at <= now]
        for k in dead:
            del self._entries[k]
        return len(dead)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class RouterCounters:
    forwards: int = 0
    drops: int = 0
    cs_hits: int = 0
    aggregations: int = 0
    delivered: int = 0
    unsolicited: int = 0

    def snapshot(self) -> dict[str, int]:
        return {
            "forwards": self.forwards,
            "drops": self.drops,
            "cs_hits": self.cs_hits,
            "aggregations": self.aggregations,
            "delivered": self.delivered,
            "unsolicited": self.unsolicited,
        }


class Router:
    """One forwarding node. send(face, raw) is supplied by the transport."""

    def __init__(
        self,
        send: Callable[[FaceId, bytes], None],
        *,
        cs_capacity: int = 0,
        digest: str = wire.DEFAULT_DIGEST,
    ):
        self.fib = Fib()
        self.pit = Pit()
        self.cs = ContentStore(cs_capacity)
        self.counters = RouterCounters()
        self._send = send
        self._digest = digest

    def add_route(self, prefix: Name, face: FaceId) -> None:
        self.fib.add(prefix, face)

    def on_frame(self, face: FaceId, raw: bytes, now: float) -> None:
        try:
            msg = wire.decode(raw, self._digest)
        except NamegateError:
            self.counters.drops += 1
            return
        if isinstance(msg, wire.Interest):
            self._on_interest(face, raw, msg, now)
        else:
            self._on_content(raw, msg, now)

    def _on_interest(self, face: FaceId, raw: bytes, i: wire.Interest, now: float) -> None:
        cached = self.cs.get(i.name, now)
        if cached is not None:
            self.counters.cs_hits += 1
            self._send(face, cached)
            return
        if self.pit.has(i.name):
            self.pit.add(i.name, face)
            self.counters.aggregations += 1
            return
        upstream = self.fib.lookup(i.name)
        if upstream is None:
            self.counters.drops += 1
            return
        self.pit.add(i.name, face)
        self.counters.forwards += 1
        self._send(upstream, raw)

    def _on_content(self, raw: bytes, c: wire.ContentObject, now: float) -> None:
        faces = self.pit.take(c.name)
        if not faces:
            self.counters.unsolicited += 1
            return
        self.cs.put(c.name, raw, c.expiry_time, now)
        for face in faces:
            self.counters.delivered += 1
            self._send(face, raw)

    def cs_evict(self, now: float) -> int:
        return self.cs.evict_expired(now)
