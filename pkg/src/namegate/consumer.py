"""Consumer-side client: signs on once, authorizes per namespace, then
fetches content, caching both tickets until just before they expire.

The client never trusts a reply on sight. Success payloads are
authenticated ciphertext, so it attempts the authenticated parse first
and only then falls back to reading a plaintext error payload; a reply
that passes neither is reported as an authentication failure, not as
whatever the bytes claim to be.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, runtime_checkable

from . import crypto, tickets, wire
from .crypto import OpCounter, RandomSource, SymKey
from .errors import AuthFail, CodecError, ErrorCode, ServiceError
from .names import Name, Namespace, namespace_matches, parse_name
from .services import NS_CLEAR, NS_ENCRYPTED
from .wire import ContentObject, Interest

DEFAULT_TIMEOUT = 5.0
DEFAULT_SKEW = 30


@runtime_checkable
class Port(Protocol):
    """One interest out, one content object back (or Timeout)."""

    def exchange(self, interest: Interest, timeout: float) -> ContentObject: ...


@dataclass(frozen=True)
class RestrictedEntry:
    """Client-side rule: names under `match` need a ticket for `request`."""

    match: Namespace
    request: Namespace
    mutual: bool = False
    encrypt_request: bool = False


@dataclass(frozen=True)
class _CachedTicket:
    blob: bytes
    key: SymKey
    expiry: int


class TicketCache:
    """Holds the sign-on ticket and one content ticket per namespace.

    A cached ticket is only reused while `now <= expiry - skew`, so a
    ticket close to expiry is refreshed early rather than risked.
    """

    def __init__(self, skew: float = DEFAULT_SKEW):
        self.skew = skew
        self._tgt: Optional[_CachedTicket] = None
        self._cgts: dict[str, _CachedTicket] = {}
        self._lock = threading.Lock()

    def _usable(self, entry: Optional[_CachedTicket], now: float):
        if entry is not None and now <= entry.expiry - self.skew:
            return entry
        return None

    def get_tgt(self, now: float) -> Optional[_CachedTicket]:
        with self._lock:
            return self._usable(self._tgt, now)

    def put_tgt(self, blob: bytes, key: SymKey, expiry: int) -> None:
        with self._lock:
            self._tgt = _CachedTicket(blob, key, expiry)

    def drop_tgt(self) -> None:
        with self._lock:
            self._tgt = None

    def get_cgt(self, ns_text: str, now: float) -> Optional[_CachedTicket]:
        with self._lock:
            return self._usable(self._cgts.get(ns_text), now)

    def put_cgt(self, ns_text: str, blob: bytes, key: SymKey, expiry: int) -> None:
        with self._lock:
            self._cgts[ns_text] = _CachedTicket(blob, key, expiry)

    def drop_cgt(self, ns_text: str) -> None:
        with self._lock:
            self._cgts.pop(ns_text, None)

    def clear(self) -> None:
        with self._lock:
            self._tgt = None
            self._cgts.clear()


class RealmClient:
    """Fetches names from a realm, handling sign-on, authorization, and
    (where configured) the mutual challenge round transparently."""

    def __init__(
        self,
        port: Port,
        *,
        uid: str,
        kas_name: Name | str,
        tgs_name: Name | str,
        restricted: list[RestrictedEntry] | None = None,
        secret_key: bytes | None = None,
        password: str | None = None,
        salt: bytes | None = None,
        kdf: dict | None = None,
        skew: float = DEFAULT_SKEW,
        timeout: float = DEFAULT_TIMEOUT,
        digest: str = wire.DEFAULT_DIGEST,
        clock: Callable[[], float] = time.time,
        rng: RandomSource | None = None,
        ops: OpCounter | None = None,
    ):
        if (secret_key is None) == (password is None):
            raise ValueError("exactly one of secret_key/password is required")
        if password is not None and salt is None:
            raise ValueError("password sign-on needs the account salt")
        self.uid = uid
        self.kas_name = kas_name if isinstance(kas_name, Name) else parse_name(kas_name)
        self.tgs_name = tgs_name if isinstance(tgs_name, Name) else parse_name(tgs_name)
        self.restricted = list(restricted or [])
        self._secret_key = secret_key
        if password is not None:
            self._signon_key: Optional[SymKey] = crypto.password_to_key(
                password, salt, **(kdf or {})
            )
        else:
            self._signon_key = None
        self.timeout = timeout
        self.digest = digest
        self.cache = TicketCache(skew)
        self.exchanges = 0
        self.ops = ops or OpCounter()
        self._port = port
        self._clock = clock
        self._rng = rng
        self._signon_lock = threading.Lock()
        self._ns_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._count_lock = threading.Lock()

    # -- plumbing ----------------------------------------------------------

    def _exchange(self, interest: Interest) -> ContentObject:
        with self._count_lock:
            self.exchanges += 1
        return self._port.exchange(interest, self.timeout)

    def _ns_lock(self, ns_text: str) -> threading.Lock:
        with self._locks_guard:
            return self._ns_locks.setdefault(ns_text, threading.Lock())

    @staticmethod
    def _as_error(payload: bytes) -> ServiceError:
        """Interpret a reply that failed the authenticated parse."""
        try:
            err = wire.parse_error(payload)
        except CodecError:
            raise AuthFail("reply is neither valid data nor a readable error")
        return ServiceError(err.code, err.message)

    def select_entry(self, name: Name) -> Optional[RestrictedEntry]:
        best: Optional[RestrictedEntry] = None
        for entry in self.restricted:
            if namespace_matches(entry.match, name):
                if best is None or len(entry.match.prefix) > len(best.match.prefix):
                    best = entry
        return best

    # -- sign-on -----------------------------------------------------------

    def authenticate(self) -> _CachedTicket:
        with self._signon_lock:
            cached = self.cache.get_tgt(self._clock())
            if cached is not None:
                return cached
            interest = wire.attach_payload(
                self.kas_name, self.uid.encode("utf-8"), self.digest
            )
            reply = self._exchange(interest)
            try:
                tgt_blob, token = wire.split_pair(reply.payload)
                if self._secret_key is not None:
                    k_cgt, t1 = tickets.open_token_cgt(
                        self._secret_key, token, ops=self.ops
                    )
                else:
                    assert self._signon_key is not None
                    k_cgt, t1 = tickets.open_token_n(
                        self._signon_key, token, ops=self.ops
                    )
            except (AuthFail, CodecError):
                raise self._as_error(reply.payload)
            self.cache.put_tgt(tgt_blob, k_cgt, t1)
            return _CachedTicket(tgt_blob, k_cgt, t1)

    # -- authorization -----------------------------------------------------

    def authorize(self, entry: RestrictedEntry) -> _CachedTicket:
        with self._ns_lock(entry.request.text):
            cached = self.cache.get_cgt(entry.request.text, self._clock())
            if cached is not None:
                return cached
            try:
                return self._request_cgt(entry)
            except ServiceError as exc:
                if exc.code != ErrorCode.TGT_EXPIRED:
                    raise
                # our sign-on ticket aged out server-side: renew it once
                self.cache.drop_tgt()
                return self._request_cgt(entry)

    def _request_cgt(self, entry: RestrictedEntry) -> _CachedTicket:
        tgt = self.authenticate()
        ns_field = entry.request.text.encode("utf-8")
        if entry.encrypt_request:
            flag = NS_ENCRYPTED
            ns_field = crypto.sym_encrypt(tgt.key, ns_field, rng=self._rng, ops=self.ops)
        else:
            flag = NS_CLEAR
        payload = bytes([flag]) + wire.pack_pair(ns_field, tgt.blob)
        reply = self._exchange(wire.attach_payload(self.tgs_name, payload, self.digest))
        try:
            cgt_blob, token = wire.split_pair(reply.payload)
            k_n, t2 = tickets.open_token_n(tgt.key, token, ops=self.ops)
        except (AuthFail, CodecError):
            raise self._as_error(reply.payload)
        self.cache.put_cgt(entry.request.text, cgt_blob, k_n, t2)
        return _CachedTicket(cgt_blob, k_n, t2)

    # -- content -----------------------------------------------------------

    def get(self, name: Name | str) -> bytes:
        name = name if isinstance(name, Name) else parse_name(name)
        entry = self.select_entry(name)
        if entry is None:
            return self._plain_fetch(name)
        try:
            return self._ticketed_fetch(name, entry)
        except ServiceError as exc:
            if exc.code != ErrorCode.CGT_EXPIRED:
                raise
            # the producer's clock outran ours: refresh the ticket once
            self.cache.drop_cgt(entry.request.text)
            return self._ticketed_fetch(name, entry)

    def _plain_fetch(self, name: Name) -> bytes:
        reply = self._exchange(Interest(name))
        if reply.expiry_time == 0:
            raise self._as_error(reply.payload)
        return reply.payload

    def _ticketed_fetch(self, name: Name, entry: RestrictedEntry) -> bytes:
        ticket = self.authorize(entry)
        reply = self._exchange(wire.attach_payload(name, ticket.blob, self.digest))
        if not entry.mutual:
            try:
                return crypto.sym_decrypt(ticket.key, reply.payload, ops=self.ops)
            except AuthFail:
                raise self._as_error(reply.payload)
        # mutual: the first reply is the challenge, not the data
        try:
            n1 = crypto.sym_decrypt(ticket.key, reply.payload, ops=self.ops)
        except AuthFail:
            raise self._as_error(reply.payload)
        if len(n1) != 32:
            raise AuthFail("challenge nonce has the wrong size")
        value = (int.from_bytes(n1, "big") + 1) % 2**256
        answer = crypto.sym_encrypt(
            ticket.key, value.to_bytes(32, "big"), rng=self._rng, ops=self.ops
        )
        challenge_id = hashlib.new(self.digest, reply.payload).digest()
        second = self._exchange(
            wire.attach_payload(name, challenge_id + answer, self.digest)
        )
        try:
            return crypto.sym_decrypt(ticket.key, second.payload, ops=self.ops)
        except AuthFail:
            raise self._as_error(second.payload)
