"""Primitive contracts: round trips, tamper rejection, counting, randomness."""

from __future__ import annotations

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from namegate.crypto import (
    KEY_BYTES,
    PK_OVERHEAD,
    SYM_OVERHEAD,
    DeterministicRandom,
    OpCounter,
    SymKey,
    SystemRandom,
    generate_keypair,
    password_to_key,
    pk_decrypt,
    pk_encrypt,
    random_key,
    random_nonce,
    sym_decrypt,
    sym_encrypt,
)
from namegate.errors import AuthFail

# cheap scrypt cost for tests; the contract only requires determinism per cost
KDF = dict(n=256, r=8, p=1)


@pytest.fixture
def rng():
    return DeterministicRandom(b"crypto tests")


def test_sym_round_trip_and_layout(rng):
    k = random_key(rng)
    for size in (0, 1, 5, 1000, 10240):
        msg = rng.bytes(size)
        blob = sym_encrypt(k, msg, rng=rng)
        assert len(blob) == size + SYM_OVERHEAD
        assert sym_decrypt(k, blob) == msg


def test_sym_encryptions_differ(rng):
    k = random_key(rng)
    assert sym_encrypt(k, b"m", rng=rng) != sym_encrypt(k, b"m", rng=rng)


def test_sym_tamper_rejected(rng):
    k = random_key(rng)
    blob = sym_encrypt(k, b"attack at dawn", rng=rng)
    for pos in range(len(blob)):
        bad = blob[:pos] + bytes([blob[pos] ^ 0x40]) + blob[pos + 1 :]
        with pytest.raises(AuthFail):
            sym_decrypt(k, bad)


def test_sym_wrong_key_and_truncation(rng):
    k, k2 = random_key(rng), random_key(rng)
    blob = sym_encrypt(k, b"secret", rng=rng)
    with pytest.raises(AuthFail):
        sym_decrypt(k2, blob)
    for cut in (0, 10, SYM_OVERHEAD - 1, len(blob) - 1):
        with pytest.raises(AuthFail):
            sym_decrypt(k, blob[:cut])


def test_pk_round_trip_constant_overhead(rng):
    pair = generate_keypair(rng)
    for size in (0, 1, 333, 4096):
        msg = rng.bytes(size)
        blob = pk_encrypt(pair.public, msg, rng=rng)
        assert len(blob) == size + PK_OVERHEAD
        assert pk_decrypt(pair.secret, blob) == msg


def test_pk_wrong_key_rejected(rng):
    pair, other = generate_keypair(rng), generate_keypair(rng)
    blob = pk_encrypt(pair.public, b"for pair only", rng=rng)
    with pytest.raises(AuthFail):
        pk_decrypt(other.secret, blob)


def test_pk_tamper_rejected(rng):
    pair = generate_keypair(rng)
    blob = pk_encrypt(pair.public, b"sealed", rng=rng)
    for pos in (0, 16, 40, len(blob) - 1):
        bad = blob[:pos] + bytes([blob[pos] ^ 0x01]) + blob[pos + 1 :]
        with pytest.raises(AuthFail):
            pk_decrypt(pair.secret, bad)
    with pytest.raises(AuthFail):
        pk_decrypt(pair.secret, blob[: PK_OVERHEAD - 1])


@settings(max_examples=30, deadline=None)
@given(st.binary(min_size=0, max_size=65536))
def test_round_trips_up_to_64k(msg):
    k = random_key()
    assert sym_decrypt(k, sym_encrypt(k, msg)) == msg
    pair = generate_keypair()
    assert pk_decrypt(pair.secret, pk_encrypt(pair.public, msg)) == msg


def test_keygen_deterministic_under_seeded_rng():
    a = generate_keypair(DeterministicRandom(b"s"))
    b = generate_keypair(DeterministicRandom(b"s"))
    c = generate_keypair(DeterministicRandom(b"t"))
    assert a == b
    assert a != c


def test_random_outputs():
    assert len(random_key().data) == KEY_BYTES
    assert len(random_nonce()) == 32
    assert random_nonce() != random_nonce()
    assert random_key().data != random_key().data
    with pytest.raises(ValueError):
        random_nonce(12)


def test_random_bit_balance():
    # 10^4 samples x 256 bits: mean 1,280,000 ones, sigma = sqrt(n*p*q) = 800;
    # allow five sigma either way.
    ones = 0
    src = SystemRandom()
    for _ in range(10_000):
        ones += int.from_bytes(src.bytes(32), "big").bit_count()
    assert abs(ones - 1_280_000) <= 4_000


def test_password_to_key_contract():
    salt = b"\x01" * 16
    k1 = password_to_key("hunter2", salt, **KDF)
    k2 = password_to_key("hunter2", salt, **KDF)
    k3 = password_to_key("hunter2", b"\x02" * 16, **KDF)
    k4 = password_to_key("hunter3", salt, **KDF)
    assert k1 == k2
    assert k1 != k3 and k1 != k4
    with pytest.raises(ValueError):
        password_to_key("", salt, **KDF)


def test_symkey_guards():
    with pytest.raises(ValueError):
        SymKey(b"short")
    assert "redacted" in repr(random_key())


def test_op_counter_counts_each_primitive_once():
    ops = OpCounter()
    k = random_key()
    pair = generate_keypair()
    blob = sym_encrypt(k, b"x", ops=ops)
    sym_decrypt(k, blob, ops=ops)
    sealed = pk_encrypt(pair.public, b"y", ops=ops)
    pk_decrypt(pair.secret, sealed, ops=ops)
    assert ops.snapshot() == {"pk_enc": 1, "pk_dec": 1, "sym_enc": 1, "sym_dec": 1}
    # sealed boxes must not leak into the symmetric tallies
    ops.reset()
    pk_encrypt(pair.public, b"z", ops=ops)
    assert ops.snapshot() == {"pk_enc": 1, "pk_dec": 0, "sym_enc": 0, "sym_dec": 0}


def test_op_counter_thread_safety():
    ops = OpCounter()

    def work():
        for _ in range(1000):
            ops.count("sym_enc")

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert ops.sym_enc == 8000


def test_deterministic_random_reproducible():
    a = DeterministicRandom(b"seed")
    b = DeterministicRandom(b"seed")
    assert [a.bytes(n) for n in (1, 31, 64, 7)] == [b.bytes(n) for n in (1, 31, 64, 7)]
    assert DeterministicRandom(b"other").bytes(16) != DeterministicRandom(b"seed").bytes(16)
