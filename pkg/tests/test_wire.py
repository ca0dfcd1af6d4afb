"""Message codec: determinism, round trips, strictness, and the hash rule."""

from __future__ import annotations

import hashlib
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from namegate.errors import BadName, CodecError, ErrorCode, HashMismatch, NamegateError
from namegate.names import Name, parse_name
from namegate.wire import (
    ContentObject,
    ErrorPayload,
    Interest,
    attach_payload,
    decode,
    encode,
    encode_error,
    hash_segment,
    pack_pair,
    parse_error,
    split_pair,
    strip_hash_suffix,
)

segment = st.text(
    alphabet=st.characters(blacklist_characters="/", blacklist_categories=("Cs",)),
    min_size=1,
    max_size=10,
).filter(lambda s: s != "*")

names = st.lists(segment, min_size=1, max_size=6).map(lambda s: Name(tuple(s)))
payloads = st.binary(min_size=0, max_size=200)


def valid_interests():
    return st.tuples(names, payloads).map(
        lambda t: attach_payload(t[0], t[1]) if t[1] else Interest(t[0])
    )


def valid_contents():
    return st.builds(
        ContentObject,
        name=names,
        payload=payloads,
        expiry_time=st.integers(min_value=0, max_value=2**64 - 1),
        validation=st.binary(max_size=32),
    )


def test_encode_interest_golden_bytes():
    raw = encode(Interest(parse_name("/a/b")))
    assert raw == b"\x01\x01\x00\x00\x00\x04/a/b"


def test_content_zero_expiry_is_explicit():
    co = ContentObject(parse_name("/a"), b"", 0)
    raw = encode(co)
    assert b"\x03\x00\x00\x00\x08" + b"\x00" * 8 in raw
    assert decode(raw) == co


@given(valid_interests())
def test_interest_round_trip(msg):
    assert decode(encode(msg)) == msg


@given(valid_contents())
def test_content_round_trip(msg):
    assert decode(encode(msg)) == msg


@given(valid_contents(), valid_contents())
def test_encoding_injective(a, b):
    if a != b:
        assert encode(a) != encode(b)


def test_decode_truncations_rejected():
    raw = encode(attach_payload(parse_name("/svc/op"), b"hello world"))
    for cut in range(len(raw)):
        with pytest.raises(CodecError):
            decode(raw[:cut])


def test_single_byte_mutations_never_pass_silently():
    # Flips in the payload, suffix, framing, or lengths are rejected; a flip
    # confined to base-name characters can only yield a *different* valid
    # interest (whose digest rule still holds), never the original message.
    original = attach_payload(parse_name("/svc/op"), b"some ticket bytes")
    raw = encode(original)
    rnd = random.Random(7)
    rejected = 0
    for _ in range(600):
        pos = rnd.randrange(len(raw))
        flip = 1 << rnd.randrange(8)
        mutated = raw[:pos] + bytes([raw[pos] ^ flip]) + raw[pos + 1 :]
        try:
            got = decode(mutated)
        except (CodecError, BadName):
            rejected += 1
            continue
        assert isinstance(got, Interest)
        assert got != original
        assert got.payload == original.payload  # only base-name bytes moved
    assert rejected > 500


def test_mutations_outside_base_name_rejected():
    original = attach_payload(parse_name("/svc/op"), b"some ticket bytes")
    raw = encode(original)
    base_span = raw.find(b"/svc/op")
    for pos in range(len(raw)):
        if base_span <= pos < base_span + len("/svc/op"):
            continue
        mutated = raw[:pos] + bytes([raw[pos] ^ 0x04]) + raw[pos + 1 :]
        with pytest.raises((CodecError, BadName)):
            decode(mutated)


def test_attach_payload_matches_reference_digest():
    base = parse_name("/realm/TGT")
    payload = b"alice"
    interest = attach_payload(base, payload)
    # independent digest oracle
    expected = "h=" + hashlib.sha256(payload).hexdigest()
    assert interest.name.segments[-1] == expected
    assert interest.name.segments[:-1] == base.segments
    assert attach_payload(base, payload) == interest
    other = attach_payload(base, b"bob")
    assert other.name.segments[-1] != expected


def test_attach_payload_requires_payload():
    with pytest.raises(ValueError):
        attach_payload(parse_name("/a"), b"")


def test_hash_suffix_mismatch_detected():
    interest = attach_payload(parse_name("/svc"), b"payload-one")
    raw = encode(interest)
    # graft a different payload of the same length behind the old suffix
    swapped = raw.replace(b"payload-one", b"payload-two")
    with pytest.raises(HashMismatch):
        decode(swapped)


def test_strip_hash_suffix():
    base = parse_name("/data/report")
    interest = attach_payload(base, b"x" * 10)
    assert strip_hash_suffix(interest.name) == base
    assert strip_hash_suffix(base) == base
    assert hash_segment(b"x").startswith("h=")


def test_decode_rejects_structural_garbage():
    name_tlv = b"\x01\x00\x00\x00\x02/a"
    cases = [
        b"",  # empty
        b"\x07" + name_tlv,  # unknown type
        b"\x01\x05\x00\x00\x00\x00",  # unknown field id
        b"\x01" + name_tlv + name_tlv,  # duplicate / non-ascending
        b"\x01\x02\x00\x00\x00\x01x" + name_tlv,  # descending order
        b"\x01",  # missing name
        b"\x01\x01\x00\x00\x00\x03/a\xff",  # name not UTF-8
        b"\x01\x01\x00\x00\x00\x03a/b",  # non-canonical name text
        b"\x01\x01\x00\x00\x00\x05/a/b/",  # trailing slash
        b"\x01" + name_tlv + b"\x02\x00\x00\x00\x00",  # empty payload field present
        b"\x01" + name_tlv + b"\x03\x00\x00\x00\x08" + b"\x00" * 8,  # expiry on interest
        b"\x02" + name_tlv,  # content without expiry
        b"\x02" + name_tlv + b"\x03\x00\x00\x00\x04\x00\x00\x00\x00",  # short expiry
    ]
    for raw in cases:
        with pytest.raises((CodecError, BadName)):
            decode(raw)


def test_decode_rejects_trailing_bytes():
    raw = encode(Interest(parse_name("/a/b"))) + b"\x00"
    with pytest.raises(CodecError):
        decode(raw)


def test_error_payload_round_trip():
    for code in ErrorCode:
        err = ErrorPayload(code, f"details for {code.name}")
        assert parse_error(encode_error(err)) == err
    assert parse_error(bytes([ErrorCode.NO_CONTENT])) == ErrorPayload(ErrorCode.NO_CONTENT, "")


def test_error_payload_rejects_garbage():
    with pytest.raises(CodecError):
        parse_error(b"")
    with pytest.raises(CodecError):
        parse_error(bytes([0]) + b"zero is unused")
    with pytest.raises(CodecError):
        parse_error(bytes([200]))
    with pytest.raises(CodecError):
        parse_error(bytes([ErrorCode.UNKNOWN_USER]) + b"\xff\xfe")


@given(st.binary(max_size=300), st.binary(max_size=300))
def test_pack_pair_round_trip(a, b):
    assert split_pair(pack_pair(a, b)) == (a, b)


def test_split_pair_rejects_short_buffers():
    with pytest.raises(CodecError):
        split_pair(b"\x00")
    with pytest.raises(CodecError):
        split_pair(b"\x00\x05abc")
