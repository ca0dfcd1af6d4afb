"""Realm assembly: an INI config plus three store files fully describe
a realm, and this module turns that description into either an
in-process network (for tests and benches) or socket-backed processes
(for the CLI).

Config layout::

    [realm]
    name = uni-x
    key = <base64 realm master key, shared by sign-on and authorization>
    digest = sha256
    skew = 30
    tgt_lifetime = 28800
    cgt_lifetime = 3600

    [stores]
    users = users.txt
    policies = policies.txt
    producers = producers.txt

    [router]
    host = 127.0.0.1
    port = 7300
    cache_capacity = 1024

    [kas]
    name = /uni-x/auth/signon
    host = 127.0.0.1
    port = 7301

    [tgs]
    name = /uni-x/auth/tickets
    host = 127.0.0.1
    port = 7302

    [producer:cs]
    name = /uni-x/cs/producer
    namespaces = /uni-x/cs/*
    plain = /uni-x/public/*
    mutual = false
    content = synthetic:4096
    content_ttl = 60
    host = 127.0.0.1
    port = 7310

    [consumer:alice]
    uid = alice
    secret = <base64 consumer secret key>      ; or password = ...
    restricted = /uni-x/cs/*
    mutual =
    encrypt_requests = false

Store files are whitespace-separated lines (see the store classes);
namespace fields may contain spaces only where they are the line's
first or only free-form field.
"""

from __future__ import annotations

import base64
import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .. import crypto
from ..consumer import RealmClient, RestrictedEntry
from ..crypto import DeterministicRandom, OpCounter, RandomSource, SymKey
from ..errors import BadName, ConfigError
from ..names import Name, Namespace, parse_name, parse_namespace
from ..services import (
    AuthServer,
    ContentProducer,
    ContentSource,
    FileSource,
    PkUser,
    PolicyStore,
    ProducerEntry,
    ProducerRegistry,
    PwdUser,
    SyntheticSource,
    TicketGrantingServer,
    UserStore,
)
from ..wire import DEFAULT_DIGEST
from .clock import ManualClock, WallClock
from .transport import (
    SequentialNetwork,
    SocketConsumerPort,
    SocketRouter,
    SocketService,
    ThreadedNetwork,
)

DEMO_PASSWORD = "correct-horse-battery"


@dataclass
class ProducerSpec:
    label: str
    name: Name
    namespaces: list[Namespace]
    plain: list[Namespace]
    mutual: bool
    content: str
    content_ttl: int
    host: str = "127.0.0.1"
    port: int = 0


@dataclass
class ConsumerSpec:
    uid: str
    secret: Optional[bytes] = None
    password: Optional[str] = None
    restricted: list[Namespace] = field(default_factory=list)
    mutual: list[Namespace] = field(default_factory=list)
    encrypt_requests: bool = False


@dataclass
class RealmConfig:
    name: str
    key: SymKey
    digest: str
    skew: float
    tgt_lifetime: int
    cgt_lifetime: int
    kas_name: Name
    tgs_name: Name
    users_path: Path
    policies_path: Path
    producers_path: Path
    producers: list[ProducerSpec]
    consumers: dict[str, ConsumerSpec]
    router_host: str = "127.0.0.1"
    router_port: int = 0
    cache_capacity: int = 1024
    kas_host: str = "127.0.0.1"
    kas_port: int = 0
    tgs_host: str = "127.0.0.1"
    tgs_port: int = 0
    base_dir: Path = Path(".")


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (ValueError, UnicodeEncodeError) as exc:
        raise ConfigError(f"{what}: invalid base64") from exc


def _namespaces(raw: str, what: str) -> list[Namespace]:
    out = []
    for piece in raw.replace(";", "\n").splitlines():
        piece = piece.strip()
        if piece:
            try:
                out.append(parse_namespace(piece))
            except BadName as exc:
                raise ConfigError(f"{what}: {exc}") from exc
    return out


def validate_topology(config: RealmConfig) -> None:
    """Reject configs the router could not serve unambiguously.

    Exact-duplicate served prefixes are refused because the FIB keeps
    one face per prefix, so the later registration would silently
    shadow the earlier one; nested prefixes are fine (longest-prefix
    match keeps them apart). Every consumer's restricted namespace must
    sit under some served prefix, or its interests could never be
    forwarded anywhere.
    """
    served: dict[tuple, str] = {}

    def claim(prefix: Name, owner: str) -> None:
        key = tuple(prefix.segments)
        other = served.get(key)
        if other is not None:
            raise ConfigError(
                f"prefix {prefix.text} is served by both {other} and {owner}"
            )
        served[key] = owner

    claim(config.kas_name, "the sign-on service")
    claim(config.tgs_name, "the authorization service")
    for spec in config.producers:
        for ns in spec.namespaces + spec.plain:
            claim(ns.prefix, f"producer {spec.label!r}")

    prefixes = list(served)
    for uid, spec in config.consumers.items():
        for ns in spec.restricted:
            segments = tuple(ns.prefix.segments)
            if not any(segments[: len(p)] == p for p in prefixes):
                raise ConfigError(
                    f"consumer {uid!r}: namespace {ns.text} has no route"
                    " to any producer"
                )


def load_config(path: Path | str) -> RealmConfig:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    base = path.parent
    try:
        realm = parser["realm"]
        stores = parser["stores"]
        kas = parser["kas"]
        tgs = parser["tgs"]
        router = parser["router"] if parser.has_section("router") else {}
    except KeyError as exc:
        raise ConfigError(f"{path}: missing section {exc}") from exc

    try:
        key = SymKey(_unb64(realm["key"], "realm key"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: realm key: {exc}") from exc

    producers = []
    consumers: dict[str, ConsumerSpec] = {}
    for section in parser.sections():
        if section.startswith("producer:"):
            sec = parser[section]
            try:
                producers.append(
                    ProducerSpec(
                        label=section.split(":", 1)[1],
                        name=parse_name(sec["name"]),
                        namespaces=_namespaces(sec.get("namespaces", ""), section),
                        plain=_namespaces(sec.get("plain", ""), section),
                        mutual=sec.getboolean("mutual", fallback=False),
                        content=sec.get("content", "synthetic:1024"),
                        content_ttl=sec.getint("content_ttl", fallback=60),
                        host=sec.get("host", "127.0.0.1"),
                        port=sec.getint("port", fallback=0),
                    )
                )
            except (KeyError, ValueError, BadName) as exc:
                raise ConfigError(f"{path}: [{section}]: {exc}") from exc
        elif section.startswith("consumer:"):
            sec = parser[section]
            uid = sec.get("uid", section.split(":", 1)[1])
            secret = sec.get("secret", fallback=None)
            password = sec.get("password", fallback=None)
            if (secret is None) == (password is None):
                raise ConfigError(
                    f"{path}: [{section}]: exactly one of secret/password required"
                )
            consumers[uid] = ConsumerSpec(
                uid=uid,
                secret=_unb64(secret, f"[{section}] secret") if secret else None,
                password=password,
                restricted=_namespaces(sec.get("restricted", ""), section),
                mutual=_namespaces(sec.get("mutual", ""), section),
                encrypt_requests=sec.getboolean("encrypt_requests", fallback=False),
            )

    try:
        config = RealmConfig(
            name=realm.get("name", "realm"),
            key=key,
            digest=realm.get("digest", DEFAULT_DIGEST),
            skew=realm.getfloat("skew", fallback=30.0),
            tgt_lifetime=realm.getint("tgt_lifetime", fallback=8 * 3600),
            cgt_lifetime=realm.getint("cgt_lifetime", fallback=3600),
            kas_name=parse_name(kas["name"]),
            tgs_name=parse_name(tgs["name"]),
            users_path=base / stores["users"],
            policies_path=base / stores["policies"],
            producers_path=base / stores["producers"],
            producers=producers,
            consumers=consumers,
            router_host=router.get("host", "127.0.0.1"),
            router_port=int(router.get("port", 0)),
            cache_capacity=int(router.get("cache_capacity", 1024)),
            kas_host=kas.get("host", "127.0.0.1"),
            kas_port=kas.getint("port", fallback=0),
            tgs_host=tgs.get("host", "127.0.0.1"),
            tgs_port=tgs.getint("port", fallback=0),
            base_dir=base,
        )
    except (KeyError, ValueError, BadName) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    validate_topology(config)
    return config


def save_config(config: RealmConfig, path: Path | str) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser["realm"] = {
        "name": config.name,
        "key": _b64(config.key.data),
        "digest": config.digest,
        "skew": str(config.skew),
        "tgt_lifetime": str(config.tgt_lifetime),
        "cgt_lifetime": str(config.cgt_lifetime),
    }
    base = Path(path).parent

    def rel(p: Path) -> str:
        try:
            return str(Path(p).relative_to(base))
        except ValueError:
            return str(p)

    parser["stores"] = {
        "users": rel(config.users_path),
        "policies": rel(config.policies_path),
        "producers": rel(config.producers_path),
    }
    parser["router"] = {
        "host": config.router_host,
        "port": str(config.router_port),
        "cache_capacity": str(config.cache_capacity),
    }
    parser["kas"] = {
        "name": config.kas_name.text,
        "host": config.kas_host,
        "port": str(config.kas_port),
    }
    parser["tgs"] = {
        "name": config.tgs_name.text,
        "host": config.tgs_host,
        "port": str(config.tgs_port),
    }
    for spec in config.producers:
        parser[f"producer:{spec.label}"] = {
            "name": spec.name.text,
            "namespaces": "; ".join(ns.text for ns in spec.namespaces),
            "plain": "; ".join(ns.text for ns in spec.plain),
            "mutual": str(spec.mutual).lower(),
            "content": spec.content,
            "content_ttl": str(spec.content_ttl),
            "host": spec.host,
            "port": str(spec.port),
        }
    for uid, spec in sorted(config.consumers.items()):
        section = {
            "uid": uid,
            "restricted": "; ".join(ns.text for ns in spec.restricted),
            "mutual": "; ".join(ns.text for ns in spec.mutual),
            "encrypt_requests": str(spec.encrypt_requests).lower(),
        }
        if spec.secret is not None:
            section["secret"] = _b64(spec.secret)
        else:
            section["password"] = spec.password or ""
        parser[f"consumer:{uid}"] = section
    with open(path, "w") as fh:
        parser.write(fh)


def make_source(spec: str, base_dir: Path) -> ContentSource:
    """content = synthetic:<size>[:<seed>] | file:<dir>  (prefixes set later)"""
    kind, _, rest = spec.partition(":")
    if kind == "synthetic":
        size_text, _, seed = rest.partition(":")
        try:
            size = int(size_text)
        except ValueError as exc:
            raise ConfigError(f"bad synthetic content size {size_text!r}") from exc
        return SyntheticSource(size, seed=seed.encode() if seed else b"synthetic")
    if kind == "file":
        return FileSource(base_dir / rest, [])  # prefixes filled by the builder
    raise ConfigError(f"unknown content source {spec!r}")


def build_producer(
    config: RealmConfig,
    spec: ProducerSpec,
    registry: ProducerRegistry,
    *,
    rng: Optional[RandomSource] = None,
) -> ContentProducer:
    """Assemble one producer from its spec, taking its key from the
    registry and refusing inconsistent registrations."""
    keys = set()
    for ns in spec.namespaces:
        entry = next((e for e in registry.entries() if e.ns == ns), None)
        if entry is None:
            raise ConfigError(
                f"producer {spec.label!r}: namespace {ns.text} is not registered"
            )
        keys.add(entry.k_p.data)
    if len(keys) > 1:
        raise ConfigError(
            f"producer {spec.label!r}: namespaces registered under different keys"
        )
    if not keys:
        if spec.plain:
            keys = {crypto.random_key(rng).data}
        else:
            raise ConfigError(f"producer {spec.label!r} serves nothing")
    source = make_source(spec.content, config.base_dir)
    if isinstance(source, FileSource):
        source.prefixes = [ns.prefix for ns in spec.namespaces + spec.plain]
    return ContentProducer(
        spec.name,
        SymKey(keys.pop()),
        source,
        namespaces=spec.namespaces,
        plain_namespaces=spec.plain,
        mutual=spec.mutual,
        skew=config.skew,
        content_ttl=spec.content_ttl,
        digest=config.digest,
        rng=rng,
        ops=OpCounter(),
    )


class Realm:
    """A fully assembled in-process realm.

    Owns the network fabric, the three services, and hands out
    ready-to-use clients. With a seed, every key, nonce, and message
    order is reproducible; without one it runs on the system RNG and
    wall clock.
    """

    def __init__(
        self,
        config: RealmConfig,
        *,
        network: str = "threaded",
        seed: Optional[int] = None,
        clock: Optional[Callable[[], float]] = None,
    ):
        validate_topology(config)
        self.config = config
        self.seed = seed
        if clock is not None:
            self.clock = clock
        elif seed is not None:
            self.clock = ManualClock()
        else:
            self.clock = WallClock()

        users = UserStore.load(config.users_path)
        policies = PolicyStore.load(config.policies_path)
        registry = ProducerRegistry.load(config.producers_path)
        self.users, self.policies, self.registry = users, policies, registry

        self.kas = AuthServer(
            config.key,
            users,
            tgt_lifetime=config.tgt_lifetime,
            rng=self._rng("kas"),
            ops=OpCounter(),
        )
        self.tgs = TicketGrantingServer(
            config.key,
            policies,
            registry,
            cgt_lifetime=config.cgt_lifetime,
            skew=config.skew,
            rng=self._rng("tgs"),
            ops=OpCounter(),
        )

        if network == "threaded":
            self.network = ThreadedNetwork(
                self.clock, cs_capacity=config.cache_capacity, digest=config.digest
            )
        elif network == "sequential":
            self.network = SequentialNetwork(
                self.clock, cs_capacity=config.cache_capacity, digest=config.digest
            )
        else:
            raise ConfigError(f"unknown network fabric {network!r}")

        self.network.add_service("kas", self.kas.handle, [config.kas_name])
        self.network.add_service("tgs", self.tgs.handle, [config.tgs_name])

        self.producers: dict[str, ContentProducer] = {}
        for spec in config.producers:
            producer = build_producer(
                config, spec, registry, rng=self._rng(f"producer-{spec.label}")
            )
            self.producers[spec.label] = producer
            self.network.add_service(
                f"producer-{spec.label}",
                producer.handle,
                [ns.prefix for ns in spec.namespaces + spec.plain],
            )

    def _rng(self, entity: str) -> Optional[RandomSource]:
        if self.seed is None:
            return None
        tag = self.seed.to_bytes(8, "big") + b"/" + entity.encode()
        return DeterministicRandom(tag)

    # -- lifecycle -----------------------------------------------------

    def start(self) -> "Realm":
        self.network.start()
        return self

    def stop(self) -> None:
        self.network.stop()

    def __enter__(self) -> "Realm":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def transcript(self):
        return self.network.transcript

    # -- participants ----------------------------------------------------

    def client(
        self, uid: str, *, label: Optional[str] = None, port=None, **overrides
    ) -> RealmClient:
        spec = self.config.consumers.get(uid)
        if spec is None:
            raise ConfigError(f"no consumer {uid!r} in the realm config")
        if port is None:
            port = self.network.add_consumer(label or f"consumer-{uid}")
        entries = [
            RestrictedEntry(
                match=ns,
                request=ns,
                mutual=ns in spec.mutual,
                encrypt_request=spec.encrypt_requests,
            )
            for ns in spec.restricted
        ]
        kwargs = dict(
            uid=uid,
            kas_name=self.config.kas_name,
            tgs_name=self.config.tgs_name,
            restricted=entries,
            skew=self.config.skew,
            digest=self.config.digest,
            clock=self.clock,
            rng=self._rng(f"client-{uid}"),
        )
        if spec.secret is not None:
            kwargs["secret_key"] = spec.secret
        else:
            record = self.users.lookup(uid)
            if not isinstance(record, PwdUser):
                raise ConfigError(f"consumer {uid!r} has a password but no pwd record")
            kwargs.update(
                password=spec.password,
                salt=record.salt,
                kdf=dict(n=record.n, r=record.r, p=record.p),
            )
        kwargs.update(overrides)
        return RealmClient(port, **kwargs)

    def attacker(self, label: str = "attacker"):
        return self.network.add_attacker(label)


# ---------------------------------------------------------------------------
# demo realm generation

def init_realm(
    directory: Path | str,
    *,
    seed: Optional[int] = None,
    kdf: Optional[dict] = None,
    content_size: int = 4096,
    content_ttl: int = 60,
) -> Path:
    """Write a complete, runnable demo realm into `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = DeterministicRandom(seed.to_bytes(8, "big")) if seed is not None else None
    kdf = kdf or {}

    k_a = crypto.random_key(rng)
    k_cs = crypto.random_key(rng)
    k_ee = crypto.random_key(rng)
    alice = crypto.generate_keypair(rng)
    carl = crypto.generate_keypair(rng)
    bob_salt = (rng.bytes(16) if rng else crypto.SystemRandom().bytes(16))
    bob_key = crypto.password_to_key(DEMO_PASSWORD, bob_salt, **kdf)

    users = UserStore()
    users.add("alice", PkUser(alice.public))
    users.add("bob", PwdUser(salt=bob_salt, key=bob_key, **kdf))
    users.add("carl", PkUser(carl.public))
    users.save(directory / "users.txt")

    cs_ns = parse_namespace("/uni-x/cs/*")
    ee_ns = parse_namespace("/uni-x/ee/*")
    policies = PolicyStore()
    policies.add("alice", cs_ns)
    policies.add("bob", cs_ns)
    policies.add("bob", ee_ns)
    policies.add("carl", ee_ns)
    policies.save(directory / "policies.txt")

    registry = ProducerRegistry()
    registry.add(ProducerEntry(cs_ns, parse_name("/uni-x/cs/producer"), k_cs))
    registry.add(ProducerEntry(ee_ns, parse_name("/uni-x/ee/producer"), k_ee))
    registry.save(directory / "producers.txt")

    config = RealmConfig(
        name="uni-x",
        key=k_a,
        digest=DEFAULT_DIGEST,
        skew=30.0,
        tgt_lifetime=8 * 3600,
        cgt_lifetime=3600,
        kas_name=parse_name("/uni-x/auth/signon"),
        tgs_name=parse_name("/uni-x/auth/tickets"),
        users_path=directory / "users.txt",
        policies_path=directory / "policies.txt",
        producers_path=directory / "producers.txt",
        producers=[
            ProducerSpec(
                label="cs",
                name=parse_name("/uni-x/cs/producer"),
                namespaces=[cs_ns],
                plain=[parse_namespace("/uni-x/public/*")],
                mutual=False,
                content=f"synthetic:{content_size}",
                content_ttl=content_ttl,
                port=0,
            ),
            ProducerSpec(
                label="ee",
                name=parse_name("/uni-x/ee/producer"),
                namespaces=[ee_ns],
                plain=[],
                mutual=True,
                content=f"synthetic:{content_size}",
                content_ttl=content_ttl,
                port=0,
            ),
        ],
        consumers={
            "alice": ConsumerSpec(uid="alice", secret=alice.secret, restricted=[cs_ns]),
            "bob": ConsumerSpec(
                uid="bob",
                password=DEMO_PASSWORD,
                restricted=[cs_ns, ee_ns],
                mutual=[ee_ns],
            ),
            "carl": ConsumerSpec(
                uid="carl", secret=carl.secret, restricted=[ee_ns], mutual=[ee_ns]
            ),
        },
        base_dir=directory,
    )
    config_path = directory / "realm.ini"
    save_config(config, config_path)
    return config_path


# ---------------------------------------------------------------------------
# socket-mode runners (used by the CLI)

def serve_kas(config: RealmConfig) -> SocketService:
    users = UserStore.load(config.users_path)
    kas = AuthServer(config.key, users, tgt_lifetime=config.tgt_lifetime)
    return SocketService(
        kas.handle, config.kas_host, config.kas_port,
        clock=WallClock(), digest=config.digest,
    )


def serve_tgs(config: RealmConfig) -> SocketService:
    policies = PolicyStore.load(config.policies_path)
    registry = ProducerRegistry.load(config.producers_path)
    tgs = TicketGrantingServer(
        config.key, policies, registry,
        cgt_lifetime=config.cgt_lifetime, skew=config.skew,
    )
    return SocketService(
        tgs.handle, config.tgs_host, config.tgs_port,
        clock=WallClock(), digest=config.digest,
    )


def serve_producer(
    config: RealmConfig, label: str, *, mutual: Optional[bool] = None
) -> SocketService:
    spec = next((p for p in config.producers if p.label == label), None)
    if spec is None:
        raise ConfigError(f"no producer {label!r} in the realm config")
    if mutual is not None:
        spec = dataclasses.replace(spec, mutual=mutual)
    registry = ProducerRegistry.load(config.producers_path)
    producer = build_producer(config, spec, registry)
    return SocketService(
        producer.handle, spec.host, spec.port, clock=WallClock(), digest=config.digest
    )


def serve_router(config: RealmConfig) -> SocketRouter:
    validate_topology(config)
    router = SocketRouter(
        listen=(config.router_host, config.router_port),
        cs_capacity=config.cache_capacity,
        clock=WallClock(),
        digest=config.digest,
    )
    router.add_upstream("kas", [config.kas_name], (config.kas_host, config.kas_port))
    router.add_upstream("tgs", [config.tgs_name], (config.tgs_host, config.tgs_port))
    for spec in config.producers:
        router.add_upstream(
            f"producer-{spec.label}",
            [ns.prefix for ns in spec.namespaces + spec.plain],
            (spec.host, spec.port),
        )
    return router


def socket_client(config: RealmConfig, uid: str, **overrides) -> RealmClient:
    spec = config.consumers.get(uid)
    if spec is None:
        raise ConfigError(f"no consumer {uid!r} in the realm config")
    port = SocketConsumerPort(
        (config.router_host, config.router_port), digest=config.digest
    )
    entries = [
        RestrictedEntry(
            match=ns, request=ns,
            mutual=ns in spec.mutual,
            encrypt_request=spec.encrypt_requests,
        )
        for ns in spec.restricted
    ]
    kwargs = dict(
        uid=uid,
        kas_name=config.kas_name,
        tgs_name=config.tgs_name,
        restricted=entries,
        skew=config.skew,
        digest=config.digest,
    )
    if spec.secret is not None:
        kwargs["secret_key"] = spec.secret
    else:
        users = UserStore.load(config.users_path)
        record = users.lookup(uid)
        if not isinstance(record, PwdUser):
            raise ConfigError(f"consumer {uid!r} has a password but no pwd record")
        kwargs.update(
            password=spec.password,
            salt=record.salt,
            kdf=dict(n=record.n, r=record.r, p=record.p),
        )
    kwargs.update(overrides)
    return RealmClient(port, **kwargs)
