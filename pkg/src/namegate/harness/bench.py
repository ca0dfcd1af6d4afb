"""The three benchmarks behind `namegate bench`:

* `handlers` — how long each service handler takes, called directly.
* `rtt`      — round-trip time per exchange type through a full realm,
               from plain cache hits up to the mutual handshake.
* `caching`  — consumer-perceived throughput and exchange totals under
               the three ticket-caching policies (both tickets cached,
               sign-on ticket only, no caching).

`bench_content_cache` is a library-only extra comparing the router's
content store under different producer caching policies.

Seeded runs use the deterministic RNG, a manual clock, and the
sequential network so the protocol bytes replay identically; timings
are always wall-clock and therefore never part of the deterministic
surface.
"""

from __future__ import annotations

import hashlib
import tempfile
import threading
import time
from pathlib import Path
from typing import Optional

from .. import crypto, tickets, wire
from ..crypto import DeterministicRandom
from ..names import Name, parse_name, parse_namespace
from ..services import (
    AuthServer,
    ContentProducer,
    PkUser,
    PolicyStore,
    ProducerEntry,
    ProducerRegistry,
    PwdUser,
    SyntheticSource,
    TicketGrantingServer,
    UserStore,
)
from .clock import EPOCH
from .realm import Realm, init_realm, load_config
from .report import BenchReport

_BENCH_KDF = dict(n=2**12, r=8, p=1)


def _timer_us(fn, iterations: int, warmup: int) -> list[float]:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(iterations):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e6)
    return samples


def _mean(samples: list[float]) -> float:
    return sum(samples) / len(samples) if samples else 0.0


# ---------------------------------------------------------------------------
# handler micro-bench

def bench_handlers(
    *,
    seed: Optional[int] = None,
    iterations: int = 300,
    warmup: int = 30,
    content_size: int = 10240,
) -> BenchReport:
    rng = DeterministicRandom(seed.to_bytes(8, "big")) if seed is not None else None
    now = EPOCH

    k_a = crypto.random_key(rng)
    k_p = crypto.random_key(rng)
    pair = crypto.generate_keypair(rng)
    salt = b"bench-salt-16byt"
    pwd_key = crypto.password_to_key("bench-password", salt, **_BENCH_KDF)

    users = UserStore()
    users.add("pk-user", PkUser(pair.public))
    users.add("pwd-user", PwdUser(salt=salt, key=pwd_key, **_BENCH_KDF))
    policies = PolicyStore()
    ns = parse_namespace("/bench/data/*")
    policies.add("pk-user", ns)
    registry = ProducerRegistry()
    registry.add(ProducerEntry(ns, parse_name("/bench/producer"), k_p))

    kas = AuthServer(k_a, users, rng=rng)
    tgs = TicketGrantingServer(k_a, policies, registry, rng=rng)
    plain_ns = parse_namespace("/bench/open/*")
    producer = ContentProducer(
        parse_name("/bench/producer"), k_p, SyntheticSource(content_size),
        namespaces=[ns], plain_namespaces=[plain_ns], rng=rng,
    )
    mutual_producer = ContentProducer(
        parse_name("/bench/producer"), k_p, SyntheticSource(content_size),
        namespaces=[ns], mutual=True, rng=rng,
    )

    kas_name = parse_name("/bench/auth/signon")
    tgs_name = parse_name("/bench/auth/tickets")
    i_pk = wire.attach_payload(kas_name, b"pk-user")
    i_pwd = wire.attach_payload(kas_name, b"pwd-user")

    tgt_blob, _ = wire.split_pair(kas.handle(i_pk, now).payload)
    i_authz = wire.attach_payload(
        tgs_name, bytes([0]) + wire.pack_pair(ns.text.encode(), tgt_blob)
    )

    k_n = crypto.random_key(rng)
    cgt_blob = tickets.seal_cgt(
        k_p, tickets.CgtPlain(ns, int(now + 3600), k_n), rng=rng
    )
    data_name = parse_name("/bench/data/item")
    i_data = wire.attach_payload(data_name, cgt_blob)
    i_plain = wire.Interest(parse_name("/bench/open/item"))

    report = BenchReport(
        "handlers",
        seed,
        {"iterations": iterations, "warmup": warmup, "content_size": content_size},
    )
    report.add_samples(
        "signon-pk", _timer_us(lambda: kas.handle(i_pk, now), iterations, warmup)
    )
    report.add_samples(
        "signon-pwd", _timer_us(lambda: kas.handle(i_pwd, now), iterations, warmup)
    )
    report.add_samples(
        "authorize", _timer_us(lambda: tgs.handle(i_authz, now), iterations, warmup)
    )
    report.add_samples(
        "content-plain",
        _timer_us(lambda: producer.handle(i_plain, now), iterations, warmup),
    )
    report.add_samples(
        "content-ticketed",
        _timer_us(lambda: producer.handle(i_data, now), iterations, warmup),
    )
    report.add_samples(
        "mutual-round1",
        _timer_us(lambda: mutual_producer.handle(i_data, now), iterations, warmup),
    )

    # round 2 needs a fresh challenge per call; issue it outside the timer
    def timed_round2():
        chall = mutual_producer.handle(i_data, now).payload
        n1 = crypto.sym_decrypt(k_n, chall)
        answer = (int.from_bytes(n1, "big") + 1) % 2**256
        reply_ct = crypto.sym_encrypt(k_n, answer.to_bytes(32, "big"), rng=rng)
        i_round2 = wire.attach_payload(
            data_name, hashlib.sha256(chall).digest() + reply_ct
        )
        t0 = time.perf_counter()
        mutual_producer.handle(i_round2, now)
        return (time.perf_counter() - t0) * 1e6

    for _ in range(warmup):
        timed_round2()
    report.add_samples("mutual-round2", [timed_round2() for _ in range(iterations)])

    report.extra["reply_payload_bytes"] = {
        "signon": len(kas.handle(i_pk, now).payload),
        "authorize": len(tgs.handle(i_authz, now).payload),
        "content-ticketed": len(producer.handle(i_data, now).payload),
        "content-plain": len(producer.handle(i_plain, now).payload),
    }
    report.extra["op_counts"] = {
        "kas": kas.ops.snapshot(),
        "tgs": tgs.ops.snapshot(),
        "producer": producer.ops.snapshot(),
        "mutual-producer": mutual_producer.ops.snapshot(),
    }
    return report


# ---------------------------------------------------------------------------
# full-path round-trip times

class _SizeProbe:
    """Port wrapper that logs (name, reply payload size) per exchange."""

    def __init__(self, inner):
        self.inner = inner
        self.log: list[tuple[str, int]] = []

    def exchange(self, interest, timeout):
        reply = self.inner.exchange(interest, timeout)
        self.log.append((interest.name.text, len(reply.payload)))
        return reply


def _bench_realm(tmp: Path, seed: Optional[int], content_size: int, **config_edits):
    config_path = init_realm(
        tmp, seed=seed, kdf=_BENCH_KDF, content_size=content_size,
        **{k: v for k, v in config_edits.items() if k in ("content_ttl",)},
    )
    config = load_config(config_path)
    for key, value in config_edits.items():
        if key not in ("content_ttl",):
            setattr(config, key, value)
    fabric = "sequential" if seed is not None else "threaded"
    return Realm(config, network=fabric, seed=seed)


def bench_rtt(
    *,
    seed: Optional[int] = None,
    requests: int = 200,
    content_size: int = 4096,
    concurrency: int = 4,
) -> BenchReport:
    report = BenchReport(
        "rtt",
        seed,
        {
            "requests": requests,
            "content_size": content_size,
            "concurrency": 1 if seed is not None else concurrency,
        },
    )
    with tempfile.TemporaryDirectory(prefix="namegate-rtt-") as tmp:
        with _bench_realm(Path(tmp), seed, content_size) as realm:
            threads = 1 if seed is not None else concurrency
            all_clients: list = []

            def run(label, slot_clients, action, prepare=None, client_factory=None):
                """Time `action(client, seq)` per request. Clients come either
                from `slot_clients` (one per thread, created and warmed up
                front) or from `client_factory` (a fresh client per request);
                `prepare` runs outside the timed window."""
                per_thread = max(1, requests // threads)
                samples: list[list[float]] = [[] for _ in range(threads)]
                t_wall = time.perf_counter()

                def worker(slot: int):
                    for i in range(per_thread):
                        seq = slot * per_thread + i
                        if client_factory:
                            client = client_factory(seq)
                            all_clients.append(client)
                        else:
                            client = slot_clients[slot]
                        if prepare:
                            prepare(client, seq)
                        t0 = time.perf_counter()
                        action(client, seq)
                        samples[slot].append((time.perf_counter() - t0) * 1e6)

                if threads == 1:
                    worker(0)
                else:
                    pool = [
                        threading.Thread(target=worker, args=(s,)) for s in range(threads)
                    ]
                    for t in pool:
                        t.start()
                    for t in pool:
                        t.join()
                elapsed = time.perf_counter() - t_wall
                merged = [v for chunk in samples for v in chunk]
                report.add_samples(
                    label, merged, req_per_s=round(len(merged) / elapsed, 1)
                )

            def fresh_clients(tag, uid="alice", warm_name=None):
                out = []
                for slot in range(threads):
                    client = realm.client(uid, label=f"{uid}-{tag}{slot}")
                    if warm_name:
                        client.get(warm_name)
                    out.append(client)
                all_clients.extend(out)
                return out

            # plain names, each unique: always forwarded to the producer
            run(
                "plain-forwarded",
                fresh_clients("pf", warm_name="/uni-x/public/warmup"),
                lambda c, i: c.get(f"/uni-x/public/unique-{i}"),
            )
            # the same plain name over and over: served from the router cache
            run(
                "plain-cached",
                fresh_clients("pc", warm_name="/uni-x/public/popular"),
                lambda c, i: c.get("/uni-x/public/popular"),
            )
            # a full sign-on per request (the cached ticket is dropped first)
            run(
                "signon",
                fresh_clients("so"),
                lambda c, i: c.authenticate(),
                prepare=lambda c, i: c.cache.drop_tgt(),
            )
            # an authorization per request against a warm sign-on ticket
            authz_clients = fresh_clients("az")
            for client in authz_clients:
                client.authenticate()
            run(
                "authorize",
                authz_clients,
                lambda c, i: c.authorize(c.restricted[0]),
                prepare=lambda c, i: c.cache.drop_cgt(c.restricted[0].request.text),
            )
            # ticketed fetches with warm tickets: one exchange per request
            run(
                "ticketed-warm",
                fresh_clients("tw", warm_name="/uni-x/cs/warmup"),
                lambda c, i: c.get(f"/uni-x/cs/item-{i}"),
            )
            # a fresh session per request: sign-on + authorization + fetch
            run(
                "ticketed-cold-session",
                None,
                lambda c, i: c.get(f"/uni-x/cs/cold-{i}"),
                client_factory=lambda i: realm.client("alice", label=f"alice-c{i}"),
            )
            # the mutual namespace with warm tickets: two rounds per request
            run(
                "mutual-warm",
                fresh_clients("mu", uid="carl", warm_name="/uni-x/ee/warmup"),
                lambda c, i: c.get(f"/uni-x/ee/item-{i}"),
            )

            # one instrumented cold session to capture reply payload sizes
            probe_port = _SizeProbe(realm.network.add_consumer("probe"))
            probe = realm.client("alice", label="probe", port=probe_port)
            all_clients.append(probe)
            probe.get("/uni-x/cs/probe-item")
            stages = ("signon", "authorize", "content-ticketed")
            report.extra["reply_payload_bytes"] = {
                stage: size for stage, (_, size) in zip(stages, probe_port.log)
            }

            plain_mean = _mean(report.samples["plain-forwarded"])
            ticketed_mean = _mean(report.samples["ticketed-warm"])
            report.extra["overhead_ratio_authorized_vs_plain"] = (
                round(ticketed_mean / plain_mean, 3) if plain_mean else None
            )
            client_ops = {"pk_enc": 0, "pk_dec": 0, "sym_enc": 0, "sym_dec": 0}
            for client in all_clients:
                for op, count in client.ops.snapshot().items():
                    client_ops[op] += count
            report.extra["op_counts"] = {
                "clients": client_ops,
                "kas": realm.kas.ops.snapshot(),
                "tgs": realm.tgs.ops.snapshot(),
                **{
                    f"producer-{label}": producer.ops.snapshot()
                    for label, producer in realm.producers.items()
                },
            }
            report.extra["router_counters"] = realm.network.router.counters.snapshot()
    return report


# ---------------------------------------------------------------------------
# ticket caching policy comparison

CACHING_POLICIES = ("both-cached", "tgt-only", "none")


class _PhaseMeter:
    """Port wrapper that counts exchanges by protocol phase."""

    def __init__(self, inner, kas_name: Name, tgs_name: Name):
        self._inner = inner
        self._kas = kas_name.segments
        self._tgs = tgs_name.segments
        self.signon = 0
        self.authorize = 0
        self.content = 0

    def exchange(self, interest, timeout):
        segments = interest.name.segments
        if segments[: len(self._kas)] == self._kas:
            self.signon += 1
        elif segments[: len(self._tgs)] == self._tgs:
            self.authorize += 1
        else:
            self.content += 1
        return self._inner.exchange(interest, timeout)

    @property
    def total(self) -> int:
        return self.signon + self.authorize + self.content


def bench_caching(
    *,
    seed: Optional[int] = None,
    requests: int = 300,
    content_size: int = 4096,
    policy: Optional[str] = None,
) -> BenchReport:
    """Fetch `requests` restricted names under each ticket-caching policy.

    * both-cached — tickets are reused, so only the first request pays
      for sign-on and authorization: N + 2 exchanges.
    * tgt-only    — the content ticket is discarded after every request,
      so each one re-authorizes: 2N + 1 exchanges.
    * none        — both tickets are discarded after every request, so
      each one runs the full three-exchange session: 3N exchanges.

    A policy is applied by dropping the client's cached tickets between
    requests — observationally the same as running with the respective
    ticket lifetime set to zero, without needing a config per policy.
    """
    chosen = CACHING_POLICIES if policy is None else (policy,)
    unknown = [p for p in chosen if p not in CACHING_POLICIES]
    if unknown:
        raise ValueError(f"unknown caching policy {unknown[0]!r}")
    report = BenchReport(
        "caching",
        seed,
        {
            "requests": requests,
            "content_size": content_size,
            "policies": list(chosen),
        },
    )
    name = "/uni-x/cs/load/doc"
    for label in chosen:
        with tempfile.TemporaryDirectory(prefix="namegate-caching-") as tmp:
            with _bench_realm(Path(tmp), seed, content_size) as realm:
                meter = _PhaseMeter(
                    realm.network.add_consumer(f"alice-{label}"),
                    realm.config.kas_name,
                    realm.config.tgs_name,
                )
                client = realm.client("alice", label=f"alice-{label}", port=meter)
                ns_text = client.select_entry(parse_name(name)).request.text
                t0 = time.perf_counter()
                for _ in range(requests):
                    client.get(name)
                    if label == "tgt-only":
                        client.cache.drop_cgt(ns_text)
                    elif label == "none":
                        client.cache.clear()
                elapsed = max(time.perf_counter() - t0, 1e-9)
                if client.exchanges != meter.total:
                    raise RuntimeError(
                        "exchange phases do not reconcile with the client count"
                    )
                report.add_counters(
                    label,
                    requests,
                    exchanges=meter.total,
                    exchanges_signon=meter.signon,
                    exchanges_authorize=meter.authorize,
                    exchanges_content=meter.content,
                    elapsed_ms=round(elapsed * 1e3, 1),
                    req_per_s=round(requests / elapsed, 1),
                )
    return report


# ---------------------------------------------------------------------------
# router content-store comparison (library-only extra)

def bench_content_cache(
    *,
    seed: Optional[int] = None,
    requests: int = 300,
    names: int = 20,
    content_size: int = 4096,
) -> BenchReport:
    """Compare where plain fetches get served under different producer
    caching policies: cache-forbidding content, cacheable content
    through a caching router, and cacheable content with the router's
    store disabled."""
    report = BenchReport(
        "content-cache",
        seed,
        {"requests": requests, "names": names, "content_size": content_size},
    )
    policies = [
        # producer forbids caching: every request reaches it
        ("no-store", dict(content_ttl=0, cache_capacity=1024)),
        # cacheable content through a caching router: one producer call per name
        ("cacheable", dict(content_ttl=3600, cache_capacity=1024)),
        # cacheable content but the router keeps no store at all
        ("router-cache-off", dict(content_ttl=3600, cache_capacity=0)),
    ]
    for label, edits in policies:
        with tempfile.TemporaryDirectory(prefix="namegate-cache-") as tmp:
            with _bench_realm(Path(tmp), seed, content_size, **edits) as realm:
                client = realm.client("alice", label="alice-cache")
                t0 = time.perf_counter()
                for i in range(requests):
                    client.get(f"/uni-x/public/item-{i % names}")
                elapsed = max(time.perf_counter() - t0, 1e-9)
                counters = realm.network.router.counters.snapshot()
                report.add_counters(
                    label,
                    requests,
                    produce_calls=realm.producers["cs"].produce_calls,
                    cache_hits=counters["cs_hits"],
                    forwards=counters["forwards"],
                    elapsed_ms=round(elapsed * 1e3, 1),
                    req_per_s=round(requests / elapsed, 1),
                )
    return report


def run_bench(which: str, **kwargs) -> BenchReport:
    runners = {
        "handlers": bench_handlers,
        "rtt": bench_rtt,
        "caching": bench_caching,
        "content-cache": bench_content_cache,
    }
    try:
        runner = runners[which]
    except KeyError:
        raise ValueError(f"unknown bench {which!r}")
    return runner(**kwargs)
