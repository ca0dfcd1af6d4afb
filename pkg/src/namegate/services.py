"""The three realm services: sign-on (AuthServer), namespace authorization
(TicketGrantingServer), and content production (ContentProducer).

Each service is a stateless request handler: an interest goes in, exactly
one content object comes out, and every failure becomes an error payload
reply (never an unanswered interest, so forwarder PIT entries are always
consumed). Reply content objects always echo the interest name and carry
expiry 0, except plain cacheable content. The producer's challenge table
is the only cross-request state and it is bounded and expiring.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Union

from . import crypto, tickets, wire
from .crypto import OpCounter, RandomSource, SymKey
from .errors import (
    AuthFail,
    BadName,
    CgtInvalid,
    CodecError,
    ErrorCode,
    NoProducer,
    NotAuthorized,
    TgtInvalid,
)
from .names import Name, Namespace, namespace_covers, namespace_matches, parse_name, parse_namespace
from .tickets import CgtPlain, TgtPlain
from .wire import ContentObject, ErrorPayload, Interest

DEFAULT_TGT_LIFETIME = 8 * 3600
DEFAULT_CGT_LIFETIME = 3600
DEFAULT_SKEW = 30
CHALLENGE_TTL = 10

NS_CLEAR = 0
NS_ENCRYPTED = 1


# ---------------------------------------------------------------------------
# stores

@dataclass(frozen=True)
class PkUser:
    public: bytes


@dataclass(frozen=True)
class PwdUser:
    salt: bytes
    key: SymKey
    n: int = 2**14
    r: int = 8
    p: int = 1


UserRecord = Union[PkUser, PwdUser]


class UserStore:
    """uid -> credential record; whitespace-free uids for the file format."""

    def __init__(self) -> None:
        self._users: dict[str, UserRecord] = {}

    def add(self, uid: str, record: UserRecord) -> None:
        if not uid or uid.split() != [uid]:
            raise ValueError(f"uid must be a single non-empty token: {uid!r}")
        self._users[uid] = record

    def lookup(self, uid: str) -> Optional[UserRecord]:
        return self._users.get(uid)

    def uids(self) -> list[str]:
        return sorted(self._users)

    def save(self, path: Path) -> None:
        lines = []
        for uid in self.uids():
            rec = self._users[uid]
            if isinstance(rec, PkUser):
                lines.append(f"{uid} pk {_b64(rec.public)}")
            else:
                lines.append(
                    f"{uid} pwd {_b64(rec.salt)} n={rec.n},r={rec.r},p={rec.p} "
                    f"{_b64(rec.key.data)}"
                )
        Path(path).write_text("".join(line + "\n" for line in lines))

    @classmethod
    def load(cls, path: Path) -> "UserStore":
        store = cls()
        for lineno, line in _records(path):
            parts = line.split()
            try:
                if len(parts) == 3 and parts[1] == "pk":
                    store.add(parts[0], PkUser(_unb64(parts[2])))
                elif len(parts) == 5 and parts[1] == "pwd":
                    kdf = dict(kv.split("=") for kv in parts[3].split(","))
                    store.add(
                        parts[0],
                        PwdUser(
                            salt=_unb64(parts[2]),
                            key=SymKey(_unb64(parts[4])),
                            n=int(kdf["n"]),
                            r=int(kdf["r"]),
                            p=int(kdf["p"]),
                        ),
                    )
                else:
                    raise ValueError("unrecognized record shape")
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad user record: {exc}") from exc
        return store


class PolicyStore:
    """uid -> namespaces the principal may be granted tickets for."""

    def __init__(self) -> None:
        self._grants: dict[str, list[Namespace]] = {}

    def add(self, uid: str, ns: Namespace) -> None:
        grants = self._grants.setdefault(uid, [])
        if ns not in grants:
            grants.append(ns)

    def namespaces_for(self, uid: str) -> list[Namespace]:
        return list(self._grants.get(uid, ()))

    def uids(self) -> list[str]:
        return sorted(self._grants)

    def save(self, path: Path) -> None:
        lines = [
            f"{uid} {ns.text}"
            for uid in self.uids()
            for ns in self._grants[uid]
        ]
        Path(path).write_text("".join(line + "\n" for line in lines))

    @classmethod
    def load(cls, path: Path) -> "PolicyStore":
        store = cls()
        for lineno, line in _records(path):
            parts = line.split(maxsplit=1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'uid namespace'")
            try:
                store.add(parts[0], parse_namespace(parts[1].strip()))
            except BadName as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
        return store


@dataclass(frozen=True)
class ProducerEntry:
    ns: Namespace
    producer: Name
    k_p: SymKey


class ProducerRegistry:
    """Namespace registrations; lookup picks the longest covering prefix."""

    def __init__(self) -> None:
        self._entries: list[ProducerEntry] = []

    def add(self, entry: ProducerEntry) -> None:
        if any(e.ns == entry.ns for e in self._entries):
            raise ValueError(f"namespace already registered: {entry.ns.text}")
        self._entries.append(entry)

    def lookup(self, requested: Namespace) -> Optional[ProducerEntry]:
        best: Optional[ProducerEntry] = None
        for entry in self._entries:
            if namespace_covers(entry.ns, requested):
                if best is None or len(entry.ns.prefix) > len(best.ns.prefix):
                    best = entry
        return best

    def entries(self) -> list[ProducerEntry]:
        return list(self._entries)

    def save(self, path: Path) -> None:
        lines = [
            f"{e.ns.text} {e.producer.text} {_b64(e.k_p.data)}" for e in self._entries
        ]
        Path(path).write_text("".join(line + "\n" for line in lines))

    @classmethod
    def load(cls, path: Path) -> "ProducerRegistry":
        reg = cls()
        for lineno, line in _records(path):
            parts = line.rsplit(None, 2)
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'namespace producer key'")
            try:
                reg.add(
                    ProducerEntry(
                        ns=parse_namespace(parts[0]),
                        producer=parse_name(parts[1]),
                        k_p=SymKey(_unb64(parts[2])),
                    )
                )
            except (BadName, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
        return reg


def _b64(data: bytes) -> str:
    import base64

    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    import base64

    return base64.b64decode(text.encode("ascii"), validate=True)


def _records(path: Path):
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


# ---------------------------------------------------------------------------
# replies

def _reply(interest: Interest, payload: bytes, expiry_time: int = 0) -> ContentObject:
    return ContentObject(interest.name, payload, expiry_time)


def _error(interest: Interest, code: ErrorCode, message: str) -> ContentObject:
    return _reply(interest, wire.encode_error(ErrorPayload(code, message)))


# ---------------------------------------------------------------------------
# sign-on service

class AuthServer:
    """Issues sign-on tickets: a sealed TGT plus a consumer token."""

    def __init__(
        self,
        k_a: SymKey,
        users: UserStore,
        *,
        tgt_lifetime: int = DEFAULT_TGT_LIFETIME,
        rng: RandomSource | None = None,
        ops: OpCounter | None = None,
    ):
        self._k_a = k_a
        self._users = users
        self._tgt_lifetime = tgt_lifetime
        self._rng = rng
        self.ops = ops or OpCounter()

    def handle(self, interest: Interest, now: float) -> ContentObject:
        try:
            uid = interest.payload.decode("utf-8")
        except UnicodeDecodeError:
            return _error(interest, ErrorCode.UNKNOWN_USER, "uid is not valid UTF-8")
        if not uid:
            return _error(interest, ErrorCode.UNKNOWN_USER, "empty uid")
        record = self._users.lookup(uid)
        if record is None:
            return _error(interest, ErrorCode.UNKNOWN_USER, f"unknown uid {uid!r}")
        k_cgt = crypto.random_key(self._rng)
        t1 = int(now) + self._tgt_lifetime
        tgt = tickets.seal_tgt(
            self._k_a, TgtPlain(uid, t1, k_cgt), rng=self._rng, ops=self.ops
        )
        if isinstance(record, PkUser):
            token = tickets.seal_token_cgt(
                record.public, k_cgt, t1, rng=self._rng, ops=self.ops
            )
        else:
            token = tickets.seal_token_n(
                record.key, k_cgt, t1, rng=self._rng, ops=self.ops
            )
        return _reply(interest, wire.pack_pair(tgt, token))


# ---------------------------------------------------------------------------
# authorization service

class TicketGrantingServer:
    """Checks namespace policy and issues content-granting tickets."""

    def __init__(
        self,
        k_a: SymKey,
        policies: PolicyStore,
        registry: ProducerRegistry,
        *,
        cgt_lifetime: int = DEFAULT_CGT_LIFETIME,
        skew: float = DEFAULT_SKEW,
        rng: RandomSource | None = None,
        ops: OpCounter | None = None,
    ):
        self._k_a = k_a
        self._policies = policies
        self._registry = registry
        self._cgt_lifetime = cgt_lifetime
        self._skew = skew
        self._rng = rng
        self.ops = ops or OpCounter()

    def verify_policy_and_fetch_key(self, uid: str, requested: Namespace) -> SymKey:
        """The policy gate: covering grant required, then a registration."""
        if not any(
            namespace_covers(policy, requested)
            for policy in self._policies.namespaces_for(uid)
        ):
            raise NotAuthorized(f"{uid!r} has no grant covering {requested.text}")
        entry = self._registry.lookup(requested)
        if entry is None:
            raise NoProducer(f"no producer registered for {requested.text}")
        return entry.k_p

    def handle(self, interest: Interest, now: float) -> ContentObject:
        try:
            flag = interest.payload[0]
            ns_field, tgt_blob = wire.split_pair(interest.payload[1:])
            if flag not in (NS_CLEAR, NS_ENCRYPTED) or not ns_field or not tgt_blob:
                raise CodecError("bad authorization request framing")
        except (IndexError, CodecError):
            return _error(
                interest, ErrorCode.NOT_AUTHORIZED, "malformed authorization request"
            )
        try:
            tgt = tickets.open_tgt(self._k_a, tgt_blob, ops=self.ops)
        except TgtInvalid:
            return _error(interest, ErrorCode.TGT_INVALID, "ticket failed authentication")
        except CodecError:
            return _error(interest, ErrorCode.TGT_INVALID, "ticket is malformed")
        if tickets.is_expired(tgt.t1, now, self._skew):
            return _error(interest, ErrorCode.TGT_EXPIRED, "sign-on ticket expired")
        try:
            if flag == NS_ENCRYPTED:
                ns_field = crypto.sym_decrypt(tgt.k_cgt, ns_field, ops=self.ops)
            requested = parse_namespace(ns_field.decode("utf-8"))
        except (AuthFail, UnicodeDecodeError, BadName):
            return _error(
                interest, ErrorCode.NOT_AUTHORIZED, "unreadable namespace in request"
            )
        try:
            k_p = self.verify_policy_and_fetch_key(tgt.uid, requested)
        except NotAuthorized as exc:
            return _error(interest, ErrorCode.NOT_AUTHORIZED, str(exc))
        except NoProducer as exc:
            # the wire code set has no separate value for this; the message
            # keeps the distinction visible
            return _error(interest, ErrorCode.NOT_AUTHORIZED, str(exc))
        k_n = crypto.random_key(self._rng)
        t2 = int(now) + self._cgt_lifetime
        cgt = tickets.seal_cgt(
            k_p, CgtPlain(requested, t2, k_n), rng=self._rng, ops=self.ops
        )
        token = tickets.seal_token_n(tgt.k_cgt, k_n, t2, rng=self._rng, ops=self.ops)
        return _reply(interest, wire.pack_pair(cgt, token))


# ---------------------------------------------------------------------------
# content producer

class ContentSource(Protocol):
    """Pluggable content repository."""

    def produce(self, name: Name) -> Optional[bytes]: ...


class SyntheticSource:
    """Deterministic pseudo-random block of fixed size, keyed by the name."""

    def __init__(self, size: int, seed: bytes = b"synthetic"):
        self.size = size
        self.seed = seed

    def produce(self, name: Name) -> Optional[bytes]:
        stream = crypto.DeterministicRandom(self.seed + name.text.encode("utf-8"))
        return stream.bytes(self.size)


class FileSource:
    """Maps the name suffix after a served prefix to a file under root."""

    def __init__(self, root: Path, prefixes: list[Name]):
        self.root = Path(root)
        self.prefixes = list(prefixes)

    def produce(self, name: Name) -> Optional[bytes]:
        best: Optional[Name] = None
        for prefix in self.prefixes:
            if namespace_matches(Namespace(prefix), name) or prefix == name:
                if best is None or len(prefix) > len(best):
                    best = prefix
        if best is None:
            return None
        suffix = name.segments[len(best.segments):]
        if not suffix or any(seg in (".", "..") or "\x00" in seg for seg in suffix):
            return None
        path = self.root.joinpath(*suffix)
        try:
            resolved = path.resolve()
            resolved.relative_to(self.root.resolve())
        except (OSError, ValueError):
            return None
        if not resolved.is_file():
            return None
        return resolved.read_bytes()


@dataclass
class ChallengeEntry:
    n1: bytes
    k_n: SymKey
    name: Name
    deadline: float


class ChallengeTable:
    """Single-use challenge state between the two mutual rounds."""

    def __init__(self, max_entries: int = 4096):
        self._entries: dict[bytes, ChallengeEntry] = {}
        self._max = max_entries
        self._lock = threading.Lock()

    def put(self, cid: bytes, entry: ChallengeEntry) -> None:
        with self._lock:
            if len(self._entries) >= self._max:
                oldest = min(self._entries, key=lambda k: self._entries[k].deadline)
                del self._entries[oldest]
            self._entries[cid] = entry

    def pop(self, cid: bytes) -> Optional[ChallengeEntry]:
        """Remove and return the entry; a challenge is spent on first touch."""
        with self._lock:
            return self._entries.pop(cid, None)

    def contains(self, cid: bytes) -> bool:
        with self._lock:
            return cid in self._entries

    def prune(self, now: float) -> int:
        with self._lock:
            dead = [k for k, e in self._entries.items() if e.deadline < now]
            for k in dead:
                del self._entries[k]
            return len(dead)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class ContentProducer:
    """Serves restricted content to ticket holders and plain content
    publicly; optionally insists on the challenge-response round."""

    def __init__(
        self,
        name: Name,
        k_p: SymKey,
        source: ContentSource,
        *,
        namespaces: list[Namespace],
        plain_namespaces: list[Namespace] | None = None,
        mutual: bool = False,
        skew: float = DEFAULT_SKEW,
        content_ttl: int = 60,
        challenge_ttl: float = CHALLENGE_TTL,
        digest: str = wire.DEFAULT_DIGEST,
        rng: RandomSource | None = None,
        ops: OpCounter | None = None,
    ):
        self.name = name
        self._k_p = k_p
        self._source = source
        self.namespaces = list(namespaces)
        self.plain_namespaces = list(plain_namespaces or [])
        self.mutual = mutual
        self._skew = skew
        self._content_ttl = content_ttl
        self._challenge_ttl = challenge_ttl
        self._digest = digest
        self._cid_len = hashlib.new(digest).digest_size
        self._rng = rng
        self.ops = ops or OpCounter()
        self.challenges = ChallengeTable()
        self.produce_calls = 0

    def _produce(self, name: Name) -> Optional[bytes]:
        self.produce_calls += 1
        return self._source.produce(name)

    def handle(self, interest: Interest, now: float) -> ContentObject:
        base = wire.strip_hash_suffix(interest.name)
        if not interest.payload:
            return self._handle_plain(interest, base, now)
        if self.mutual:
            cid = interest.payload[: self._cid_len]
            entry = self.challenges.pop(cid)
            if entry is not None:
                return self._handle_round2(interest, base, entry, now)
        return self._handle_ticket(interest, base, now)

    def _handle_plain(
        self, interest: Interest, base: Name, now: float
    ) -> ContentObject:
        if any(namespace_matches(ns, base) for ns in self.namespaces):
            return _error(
                interest, ErrorCode.CGT_INVALID, "request is missing its ticket payload"
            )
        if not any(namespace_matches(ns, base) for ns in self.plain_namespaces):
            return _error(interest, ErrorCode.NO_CONTENT, "name is not served here")
        data = self._produce(base)
        if data is None:
            return _error(interest, ErrorCode.NO_CONTENT, "no content for this name")
        return _reply(interest, data, expiry_time=int(now) + self._content_ttl)

    def _handle_ticket(
        self, interest: Interest, base: Name, now: float
    ) -> ContentObject:
        try:
            cgt = tickets.open_cgt(self._k_p, interest.payload, ops=self.ops)
        except (CgtInvalid, CodecError):
            return _error(interest, ErrorCode.CGT_INVALID, "ticket failed authentication")
        if tickets.is_expired(cgt.t2, now, self._skew):
            return _error(interest, ErrorCode.CGT_EXPIRED, "content ticket expired")
        if not namespace_matches(cgt.ns, base):
            return _error(
                interest, ErrorCode.PREFIX_MISMATCH, "ticket does not cover this name"
            )
        if self.mutual:
            self.challenges.prune(now)
            n1 = crypto.random_nonce(rng=self._rng)
            chall = crypto.sym_encrypt(cgt.k_n, n1, rng=self._rng, ops=self.ops)
            cid = hashlib.new(self._digest, chall).digest()
            self.challenges.put(
                cid, ChallengeEntry(n1, cgt.k_n, base, now + self._challenge_ttl)
            )
            return _reply(interest, chall)
        return self._deliver(interest, base, cgt.k_n)

    def _handle_round2(
        self, interest: Interest, base: Name, entry: ChallengeEntry, now: float
    ) -> ContentObject:
        if now > entry.deadline:
            return _error(interest, ErrorCode.CHALLENGE_FAILED, "challenge expired")
        if entry.name != base:
            return _error(
                interest, ErrorCode.CHALLENGE_FAILED, "challenge bound to another name"
            )
        try:
            value = crypto.sym_decrypt(
                entry.k_n, interest.payload[self._cid_len :], ops=self.ops
            )
        except AuthFail:
            return _error(
                interest, ErrorCode.CHALLENGE_FAILED, "reply failed authentication"
            )
        if len(value) != 32:
            return _error(interest, ErrorCode.CHALLENGE_FAILED, "reply has wrong size")
        expected = (int.from_bytes(entry.n1, "big") + 1) % 2**256
        if int.from_bytes(value, "big") != expected:
            return _error(interest, ErrorCode.CHALLENGE_FAILED, "wrong challenge value")
        return self._deliver(interest, base, entry.k_n)

    def _deliver(self, interest: Interest, base: Name, k_n: SymKey) -> ContentObject:
        data = self._produce(base)
        if data is None:
            return _error(interest, ErrorCode.NO_CONTENT, "no content for this name")
        return _reply(interest, crypto.sym_encrypt(k_n, data, rng=self._rng, ops=self.ops))
