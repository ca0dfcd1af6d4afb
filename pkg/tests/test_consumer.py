"""Client behaviour against real service handlers over a loopback port.

The port re-encodes every message through the wire codec so the client
is exercised against exactly what would cross a network.
"""

import threading

import pytest

from namegate import crypto, tickets, wire
from namegate.consumer import Port, RealmClient, RestrictedEntry, TicketCache
from namegate.crypto import DeterministicRandom, SymKey
from namegate.errors import AuthFail, ErrorCode, ServiceError, Timeout
from namegate.names import is_prefix, parse_name, parse_namespace
from namegate.services import (
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

NOW = 1_700_000_000.0
KDF_CHEAP = dict(n=256, r=8, p=1)

KAS_NAME = parse_name("/realm/kas/signon")
TGS_NAME = parse_name("/realm/tgs/authorize")
CS_NS = parse_namespace("/edu/uni-X/cs/*")
EE_NS = parse_namespace("/edu/uni-X/ee/*")
PUB_NS = parse_namespace("/edu/uni-X/public/*")


class Clock:
    def __init__(self, start=NOW):
        self.t = start

    def __call__(self):
        return self.t


class LoopbackPort:
    """Routes interests to handlers by name prefix, round-tripping every
    message through the codec."""

    def __init__(self, clock):
        self.clock = clock
        self.routes = []

    def add(self, prefix, handler):
        self.routes.append((prefix, handler))

    def exchange(self, interest, timeout):
        seen = wire.decode(wire.encode(interest))
        for prefix, handler in self.routes:
            if is_prefix(prefix, seen.name):
                reply = handler(seen, self.clock())
                return wire.decode(wire.encode(reply))
        raise Timeout(f"no route for {seen.name.text}")


class Realm:
    """A complete in-process realm plus a keyed client factory."""

    def __init__(self, *, mutual=False):
        self.clock = Clock()
        self.rng = DeterministicRandom(b"consumer-tests")
        self.k_a = crypto.random_key(self.rng)
        self.k_p = crypto.random_key(self.rng)
        self.pair = crypto.generate_keypair(self.rng)
        self.salt = b"pepper-and-salt!"
        pwd_key = crypto.password_to_key("tr0ub4dor", self.salt, **KDF_CHEAP)

        users = UserStore()
        users.add("alice", PkUser(self.pair.public))
        users.add("bob", PwdUser(salt=self.salt, key=pwd_key, **KDF_CHEAP))
        policies = PolicyStore()
        for uid in ("alice", "bob"):
            policies.add(uid, CS_NS)
            policies.add(uid, EE_NS)
        registry = ProducerRegistry()
        registry.add(ProducerEntry(CS_NS, parse_name("/pr"), self.k_p))
        registry.add(ProducerEntry(EE_NS, parse_name("/pr"), self.k_p))

        self.kas = AuthServer(self.k_a, users, rng=self.rng)
        self.tgs = TicketGrantingServer(self.k_a, policies, registry, rng=self.rng)
        self.source = SyntheticSource(512, seed=b"realm")
        self.producer = ContentProducer(
            parse_name("/pr"), self.k_p, self.source,
            namespaces=[CS_NS, EE_NS], plain_namespaces=[PUB_NS],
            mutual=mutual, rng=self.rng,
        )
        self.port = LoopbackPort(self.clock)
        self.port.add(KAS_NAME, self.kas.handle)
        self.port.add(TGS_NAME, self.tgs.handle)
        self.port.add(parse_name("/edu/uni-X"), self.producer.handle)
        self.mutual = mutual

    def client(self, uid="alice", *, port=None, entries=None, **kwargs):
        if entries is None:
            entries = [
                RestrictedEntry(CS_NS, CS_NS, mutual=self.mutual),
                RestrictedEntry(EE_NS, EE_NS, mutual=self.mutual),
            ]
        creds = (
            dict(secret_key=self.pair.secret)
            if uid == "alice"
            else dict(password="tr0ub4dor", salt=self.salt, kdf=KDF_CHEAP)
        )
        return RealmClient(
            port or self.port,
            uid=uid,
            kas_name=KAS_NAME,
            tgs_name=TGS_NAME,
            restricted=entries,
            clock=self.clock,
            rng=self.rng,
            **creds,
            **kwargs,
        )


@pytest.fixture
def realm():
    return Realm()


def expect_data(realm, name):
    return SyntheticSource(512, seed=b"realm").produce(parse_name(name))


def test_plain_fetch(realm):
    client = realm.client()
    data = client.get("/edu/uni-X/public/news")
    assert data == expect_data(realm, "/edu/uni-X/public/news")
    assert client.exchanges == 1  # no tickets involved


def test_plain_fetch_error(realm):
    client = realm.client(entries=[])
    with pytest.raises(ServiceError) as exc:
        client.get("/edu/uni-X/cs/notes")  # treated as plain: producer objects
    assert exc.value.code == ErrorCode.CGT_INVALID


def test_restricted_fetch_pk_user(realm):
    client = realm.client("alice")
    data = client.get("/edu/uni-X/cs/exams/final.pdf")
    assert data == expect_data(realm, "/edu/uni-X/cs/exams/final.pdf")
    assert client.exchanges == 3  # sign-on, authorization, fetch


def test_restricted_fetch_password_user(realm):
    client = realm.client("bob")
    data = client.get("/edu/uni-X/cs/exams/final.pdf")
    assert data == expect_data(realm, "/edu/uni-X/cs/exams/final.pdf")
    assert client.exchanges == 3


def test_ticket_reuse_within_namespace(realm):
    client = realm.client()
    client.get("/edu/uni-X/cs/a")
    client.get("/edu/uni-X/cs/b")
    client.get("/edu/uni-X/cs/c")
    assert client.exchanges == 5  # 1 sign-on + 1 authorization + 3 fetches


def test_tgt_reuse_across_namespaces(realm):
    client = realm.client()
    client.get("/edu/uni-X/cs/a")
    client.get("/edu/uni-X/ee/b")
    # second namespace needs a new authorization but not a new sign-on
    assert client.exchanges == 5


def test_mutual_fetch():
    realm = Realm(mutual=True)
    client = realm.client()
    data = client.get("/edu/uni-X/cs/exams/final.pdf")
    assert data == expect_data(realm, "/edu/uni-X/cs/exams/final.pdf")
    assert client.exchanges == 4  # sign-on, authorization, two rounds
    # challenge spent server-side
    assert len(realm.producer.challenges) == 0


def test_mutual_ticket_reuse():
    realm = Realm(mutual=True)
    client = realm.client()
    client.get("/edu/uni-X/cs/a")
    client.get("/edu/uni-X/cs/b")
    assert client.exchanges == 6  # 2 + two rounds per fetch


def test_unknown_user_surfaces(realm):
    client = realm.client()
    client.uid = "mallory"
    with pytest.raises(ServiceError) as exc:
        client.get("/edu/uni-X/cs/a")
    assert exc.value.code == ErrorCode.UNKNOWN_USER


def test_not_authorized_surfaces(realm):
    client = realm.client(
        entries=[RestrictedEntry(PUB_NS, PUB_NS)]  # no policy grants this
    )
    with pytest.raises(ServiceError) as exc:
        client.get("/edu/uni-X/public/x")
    assert exc.value.code == ErrorCode.NOT_AUTHORIZED


def test_stale_tgt_renewed_once(realm):
    client = realm.client()
    # a ticket that the cache believes is fresh but the TGS will reject
    stale_k = crypto.random_key(realm.rng)
    stale = tickets.seal_tgt(
        realm.k_a, tickets.TgtPlain("alice", int(NOW - 3600), stale_k), rng=realm.rng
    )
    client.cache.put_tgt(stale, stale_k, int(NOW + 9999))
    data = client.get("/edu/uni-X/cs/a")
    assert data == expect_data(realm, "/edu/uni-X/cs/a")
    # failed authorization, sign-on, authorization, fetch
    assert client.exchanges == 4


def test_stale_cgt_refreshed_once(realm):
    client = realm.client()
    stale_kn = crypto.random_key(realm.rng)
    stale = tickets.seal_cgt(
        realm.k_p, tickets.CgtPlain(CS_NS, int(NOW - 3600), stale_kn), rng=realm.rng
    )
    client.cache.put_cgt(CS_NS.text, stale, stale_kn, int(NOW + 9999))
    data = client.get("/edu/uni-X/cs/a")
    assert data == expect_data(realm, "/edu/uni-X/cs/a")
    # failed fetch, sign-on, authorization, fetch
    assert client.exchanges == 4


def test_prefix_mismatch_not_retried(realm):
    client = realm.client(
        entries=[RestrictedEntry(CS_NS, parse_namespace("/edu/uni-X/cs/exams/*"))]
    )
    with pytest.raises(ServiceError) as exc:
        client.get("/edu/uni-X/cs/lectures/1")  # ticket narrower than the name
    assert exc.value.code == ErrorCode.PREFIX_MISMATCH
    before = client.exchanges
    with pytest.raises(ServiceError):
        client.get("/edu/uni-X/cs/lectures/1")
    assert client.exchanges == before + 1  # only the failed fetch, no retry loop


def test_encrypted_namespace_request(realm):
    client = realm.client(
        entries=[RestrictedEntry(CS_NS, CS_NS, encrypt_request=True)]
    )
    data = client.get("/edu/uni-X/cs/a")
    assert data == expect_data(realm, "/edu/uni-X/cs/a")
    assert client.exchanges == 3


class TamperPort:
    def __init__(self, inner):
        self.inner = inner
        self.active = False

    def exchange(self, interest, timeout):
        reply = self.inner.exchange(interest, timeout)
        if self.active and reply.payload:
            raw = bytearray(reply.payload)
            raw[-1] ^= 0x40
            reply = wire.ContentObject(reply.name, bytes(raw), reply.expiry_time)
        return reply


def test_tampered_reply_is_authfail_not_data(realm):
    tamper = TamperPort(realm.port)
    client = realm.client(port=tamper)
    client.get("/edu/uni-X/cs/a")  # warm the tickets honestly
    tamper.active = True
    with pytest.raises(AuthFail):
        client.get("/edu/uni-X/cs/b")


def test_select_entry_longest_match(realm):
    inner = RestrictedEntry(parse_namespace("/edu/uni-X/cs/exams/*"), EE_NS)
    outer = RestrictedEntry(CS_NS, CS_NS)
    client = realm.client(entries=[outer, inner])
    assert client.select_entry(parse_name("/edu/uni-X/cs/exams/x")) is inner
    assert client.select_entry(parse_name("/edu/uni-X/cs/notes")) is outer
    assert client.select_entry(parse_name("/com/other")) is None


def test_no_route_times_out(realm):
    client = realm.client(entries=[])
    with pytest.raises(Timeout):
        client.get("/net/elsewhere/x")


def test_concurrent_first_fetches_sign_on_once(realm):
    client = realm.client()
    errors = []

    def fetch(i):
        try:
            client.get(f"/edu/uni-X/cs/item-{i}")
        except Exception as exc:  # pragma: no cover - surfaced below
            errors.append(exc)

    threads = [threading.Thread(target=fetch, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    # one sign-on, one authorization, eight fetches
    assert client.exchanges == 10


def test_client_requires_exactly_one_credential(realm):
    with pytest.raises(ValueError):
        RealmClient(realm.port, uid="x", kas_name=KAS_NAME, tgs_name=TGS_NAME)
    with pytest.raises(ValueError):
        RealmClient(
            realm.port, uid="x", kas_name=KAS_NAME, tgs_name=TGS_NAME,
            secret_key=b"s" * 32, password="p", salt=b"s" * 16,
        )
    with pytest.raises(ValueError):
        RealmClient(
            realm.port, uid="x", kas_name=KAS_NAME, tgs_name=TGS_NAME, password="p"
        )


# ---------------------------------------------------------------------------
# ticket cache

def test_ticket_cache_skew_boundary():
    cache = TicketCache(skew=30)
    cache.put_tgt(b"blob", SymKey(b"k" * 32), 1000)
    assert cache.get_tgt(970.0) is not None  # exactly at expiry - skew
    assert cache.get_tgt(970.5) is None
    cache.put_cgt("/a/*", b"blob", SymKey(b"k" * 32), 1000)
    assert cache.get_cgt("/a/*", 970.0) is not None
    assert cache.get_cgt("/a/*", 971.0) is None
    assert cache.get_cgt("/b/*", 0.0) is None


def test_ticket_cache_drop_and_clear():
    cache = TicketCache(skew=0)
    cache.put_tgt(b"t", SymKey(b"k" * 32), 10**10)
    cache.put_cgt("/a/*", b"c", SymKey(b"k" * 32), 10**10)
    cache.drop_tgt()
    assert cache.get_tgt(0.0) is None
    cache.drop_cgt("/a/*")
    assert cache.get_cgt("/a/*", 0.0) is None
    cache.put_tgt(b"t", SymKey(b"k" * 32), 10**10)
    cache.clear()
    assert cache.get_tgt(0.0) is None


def test_port_protocol_is_satisfied(realm):
    # the loopback test double satisfies the structural port type
    assert isinstance(realm.port, Port)
