"""Router semantics: LPM, PIT aggregation, CS expiry and capacity."""

from __future__ import annotations

import random

from namegate.forwarder import ContentStore, Fib, Pit, Router
from namegate.names import Name, parse_name
from namegate.wire import ContentObject, Interest, attach_payload, encode


class Wire:
    """Captures router sends as (face, raw) records."""

    def __init__(self):
        self.sent = []

    def __call__(self, face, raw):
        self.sent.append((face, raw))


def make_router(routes, cs_capacity=0):
    w = Wire()
    r = Router(w, cs_capacity=cs_capacity)
    for prefix, face in routes:
        r.add_route(parse_name(prefix), face)
    return r, w


def test_fib_longest_prefix_examples():
    fib = Fib()
    fib.add(parse_name("/edu"), 1)
    fib.add(parse_name("/edu/uni-X"), 2)
    assert fib.lookup(parse_name("/edu/uni-X/ics")) == 2
    assert fib.lookup(parse_name("/com/x")) is None
    fib2 = Fib()
    fib2.add(parse_name("/edu/uni-X/ics"), 3)
    assert fib2.lookup(parse_name("/edu/uni-X")) is None


def test_fib_against_brute_force_oracle():
    rnd = random.Random(20)
    alphabet = ["a", "b", "c", "d"]
    for _ in range(200):
        fib = Fib()
        table = {}
        for _ in range(rnd.randrange(1, 12)):
            prefix = Name(tuple(rnd.choices(alphabet, k=rnd.randrange(1, 5))))
            face = rnd.randrange(100)
            fib.add(prefix, face)
            table[prefix.segments] = face
        for _ in range(20):
            name = Name(tuple(rnd.choices(alphabet, k=rnd.randrange(1, 6))))
            # oracle: scan every entry, keep the longest matching prefix
            best, best_len = None, -1
            for segs, face in table.items():
                if name.segments[: len(segs)] == segs and len(segs) > best_len:
                    best, best_len = face, len(segs)
            assert fib.lookup(name) == best


def test_interest_forwarded_and_pit_created():
    r, w = make_router([("/svc", 9)])
    raw = encode(Interest(parse_name("/svc/op")))
    r.on_frame(1, raw, now=0)
    assert w.sent == [(9, raw)]
    assert r.pit.has(parse_name("/svc/op"))
    assert r.counters.forwards == 1


def test_pit_aggregation_single_upstream_forward():
    r, w = make_router([("/svc", 9)])
    raw = encode(Interest(parse_name("/svc/op")))
    r.on_frame(1, raw, now=0)
    r.on_frame(2, raw, now=0)
    assert [f for f, _ in w.sent] == [9]
    assert r.counters.aggregations == 1
    co_raw = encode(ContentObject(parse_name("/svc/op"), b"D", 0))
    r.on_frame(9, co_raw, now=0)
    assert w.sent[1:] == [(1, co_raw), (2, co_raw)]
    assert not r.pit.has(parse_name("/svc/op"))
    # entry consumed: a second copy is unsolicited
    r.on_frame(9, co_raw, now=0)
    assert len(w.sent) == 3
    assert r.counters.unsolicited == 1


def test_no_fib_match_drops():
    r, w = make_router([("/svc", 9)])
    r.on_frame(1, encode(Interest(parse_name("/other/op"))), now=0)
    assert w.sent == []
    assert r.counters.drops == 1
    assert not r.pit.has(parse_name("/other/op"))


def test_undecodable_frame_drops():
    r, w = make_router([("/svc", 9)])
    r.on_frame(1, b"\xff\x00garbage", now=0)
    assert w.sent == [] and r.counters.drops == 1


def test_forwarding_is_byte_identical():
    r, w = make_router([("/svc", 9)])
    raw = encode(attach_payload(parse_name("/svc/op"), b"ticket"))
    r.on_frame(1, raw, now=0)
    assert w.sent[0][1] is raw  # same buffer, not a re-encode
    reply = encode(ContentObject(wire_name(raw), b"R", 0))
    r.on_frame(9, reply, now=0)
    assert w.sent[1][1] is reply


def wire_name(raw):
    from namegate.wire import decode

    return decode(raw).name


def test_cs_serves_fresh_content_without_forwarding():
    r, w = make_router([("/svc", 9)], cs_capacity=8)
    raw = encode(Interest(parse_name("/svc/item")))
    r.on_frame(1, raw, now=100)
    co_raw = encode(ContentObject(parse_name("/svc/item"), b"D", 200))
    r.on_frame(9, co_raw, now=100)
    w.sent.clear()
    r.on_frame(2, raw, now=150)
    assert w.sent == [(2, co_raw)]
    assert r.counters.cs_hits == 1
    assert not r.pit.has(parse_name("/svc/item"))


def test_cs_never_stores_do_not_cache():
    r, w = make_router([("/svc", 9)], cs_capacity=8)
    raw = encode(Interest(parse_name("/svc/item")))
    r.on_frame(1, raw, now=100)
    r.on_frame(9, encode(ContentObject(parse_name("/svc/item"), b"D", 0)), now=100)
    assert len(w.sent) == 2  # forwarded + delivered
    r.on_frame(2, raw, now=100)
    assert r.counters.cs_hits == 0
    assert r.counters.forwards == 2


def test_cs_never_serves_expired():
    cs = ContentStore(4)
    name = parse_name("/a")
    assert cs.put(name, b"raw", expiry_time=200, now=100)
    assert cs.get(name, now=150) == b"raw"
    assert cs.get(name, now=200) is None
    # already expired on arrival: not stored
    assert not cs.put(name, b"raw", expiry_time=90, now=100)
    assert len(cs) == 0


def test_cs_eviction():
    cs = ContentStore(4)
    assert cs.evict_expired(now=0) == 0
    cs.put(parse_name("/a"), b"1", expiry_time=99, now=0)
    cs.put(parse_name("/b"), b"2", expiry_time=101, now=0)
    assert cs.evict_expired(now=100) == 1
    assert len(cs) == 1


def test_cs_lru_capacity_bound():
    cs = ContentStore(3)
    for i in range(5):
        cs.put(parse_name(f"/n/{i}"), b"x", expiry_time=1000, now=0)
        assert len(cs) <= 3
    assert cs.get(parse_name("/n/0"), 0) is None
    assert cs.get(parse_name("/n/4"), 0) == b"x"
    # touching an entry protects it from eviction
    cs.get(parse_name("/n/2"), 0)
    cs.put(parse_name("/n/5"), b"x", expiry_time=1000, now=0)
    assert cs.get(parse_name("/n/2"), 0) == b"x"
    assert cs.get(parse_name("/n/3"), 0) is None


def test_unsolicited_content_never_cached():
    r, w = make_router([("/svc", 9)], cs_capacity=8)
    r.on_frame(9, encode(ContentObject(parse_name("/svc/item"), b"D", 10_000)), now=0)
    assert r.counters.unsolicited == 1
    assert len(r.cs) == 0 and w.sent == []


def test_distinct_hash_suffixes_are_not_aggregated():
    r, w = make_router([("/realm", 9)], cs_capacity=8)
    a = encode(attach_payload(parse_name("/realm/TGT"), b"alice"))
    b = encode(attach_payload(parse_name("/realm/TGT"), b"bob"))
    r.on_frame(1, a, now=0)
    r.on_frame(2, b, now=0)
    assert r.counters.forwards == 2 and r.counters.aggregations == 0


def test_pit_delivery_only_to_recorded_faces():
    # random interleavings: content reaches all and only the recorded faces
    rnd = random.Random(33)
    for _ in range(50):
        r, w = make_router([("/s", 99)])
        pending: dict[str, set[int]] = {}
        for _ in range(30):
            name = parse_name(f"/s/{rnd.randrange(6)}")
            if rnd.random() < 0.6:
                face = rnd.randrange(1, 5)
                r.on_frame(face, encode(Interest(name)), now=0)
                pending.setdefault(name.text, set()).add(face)
            else:
                w.sent.clear()
                r.on_frame(99, encode(ContentObject(name, b"D", 0)), now=0)
                got = {f for f, _ in w.sent}
                assert got == pending.pop(name.text, set())
        # drain the rest
        for text, faces in list(pending.items()):
            w.sent.clear()
            r.on_frame(99, encode(ContentObject(parse_name(text), b"D", 0)), now=0)
            assert {f for f, _ in w.sent} == faces


def test_pit_dedups_same_face():
    p = Pit()
    name = parse_name("/x")
    assert p.add(name, 1)
    assert not p.add(name, 1)
    assert not p.add(name, 2)
    assert p.take(name) == [1, 2]
    assert p.take(name) == []
