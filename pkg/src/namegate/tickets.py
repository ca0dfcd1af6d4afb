"""Ticket and token construction: the heart of the credential chain.

A ticket-granting ticket (TGT) binds a principal to a short-term session
key until t1 and is sealed under the key shared by the authentication and
authorization services. A content-granting ticket (CGT) binds a namespace
to a content session key until t2 and is sealed under the key shared with
the producer that serves the namespace. The consumer-side tokens carry the
matching session key and expiry, sealed to the consumer's public key (TGT
case) or under its current session key (CGT case).

Plaintext layouts are fixed here and nowhere else:

    TGT   = u16 len(uid) || uid || u64 t1 || key (32)
    CGT   = u16 len(namespace text) || namespace text || key (32) || u64 t2
    token = key (32) || u64 expiry

All integers are big-endian; times are absolute seconds since the epoch.
Length prefixes keep variable-length fields from splicing into fixed ones.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import crypto
from .crypto import OpCounter, RandomSource, SymKey
from .errors import AuthFail, BadName, CgtInvalid, CodecError, TgtInvalid
from .names import Namespace, parse_namespace

TOKEN_PLAIN_BYTES = crypto.KEY_BYTES + 8


@dataclass(frozen=True)
class TgtPlain:
    """Decrypted ticket-granting ticket."""

    uid: str
    t1: int
    k_cgt: SymKey


@dataclass(frozen=True)
class CgtPlain:
    """Decrypted content-granting ticket."""

    ns: Namespace
    t2: int
    k_n: SymKey


def is_expired(expiry: int, now: float, skew: float) -> bool:
    """Expired iff now is past expiry plus the skew allowance (boundary ok)."""
    return now > expiry + skew


def _pack_tgt(p: TgtPlain) -> bytes:
    uid = p.uid.encode("utf-8")
    if not uid:
        raise ValueError("uid must be non-empty")
    if len(uid) > 0xFFFF:
        raise ValueError("uid too long")
    return len(uid).to_bytes(2, "big") + uid + p.t1.to_bytes(8, "big") + p.k_cgt.data


def _unpack_tgt(buf: bytes) -> TgtPlain:
    if len(buf) < 2:
        raise CodecError("ticket plaintext too short")
    n = int.from_bytes(buf[:2], "big")
    if len(buf) != 2 + n + 8 + crypto.KEY_BYTES or n == 0:
        raise CodecError("ticket plaintext has wrong layout")
    try:
        uid = buf[2 : 2 + n].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CodecError("uid is not valid UTF-8") from exc
    t1 = int.from_bytes(buf[2 + n : 10 + n], "big")
    return TgtPlain(uid, t1, SymKey(buf[10 + n :]))


def seal_tgt(
    k_a: SymKey,
    plain: TgtPlain,
    *,
    rng: RandomSource | None = None,
    ops: OpCounter | None = None,
) -> bytes:
    return crypto.sym_encrypt(k_a, _pack_tgt(plain), rng=rng, ops=ops)


def open_tgt(k_a: SymKey, blob: bytes, *, ops: OpCounter | None = None) -> TgtPlain:
    try:
        plain = crypto.sym_decrypt(k_a, blob, ops=ops)
    except AuthFail as exc:
        raise TgtInvalid("ticket failed authentication") from exc
    return _unpack_tgt(plain)


def _pack_cgt(p: CgtPlain) -> bytes:
    ns = p.ns.text.encode("utf-8")
    if len(ns) > 0xFFFF:
        raise ValueError("namespace too long")
    return len(ns).to_bytes(2, "big") + ns + p.k_n.data + p.t2.to_bytes(8, "big")


def _unpack_cgt(buf: bytes) -> CgtPlain:
    if len(buf) < 2:
        raise CodecError("ticket plaintext too short")
    n = int.from_bytes(buf[:2], "big")
    if len(buf) != 2 + n + crypto.KEY_BYTES + 8 or n == 0:
        raise CodecError("ticket plaintext has wrong layout")
    try:
        ns = parse_namespace(buf[2 : 2 + n].decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise CodecError("namespace is not valid UTF-8") from exc
    except BadName as exc:
        raise CodecError(f"ticket namespace is malformed: {exc}") from exc
    k_n = SymKey(buf[2 + n : 2 + n + crypto.KEY_BYTES])
    t2 = int.from_bytes(buf[2 + n + crypto.KEY_BYTES :], "big")
    return CgtPlain(ns, t2, k_n)


def seal_cgt(
    k_p: SymKey,
    plain: CgtPlain,
    *,
    rng: RandomSource | None = None,
    ops: OpCounter | None = None,
) -> bytes:
    return crypto.sym_encrypt(k_p, _pack_cgt(plain), rng=rng, ops=ops)


def open_cgt(k_p: SymKey, blob: bytes, *, ops: OpCounter | None = None) -> CgtPlain:
    try:
        plain = crypto.sym_decrypt(k_p, blob, ops=ops)
    except AuthFail as exc:
        raise CgtInvalid("ticket failed authentication") from exc
    return _unpack_cgt(plain)


def _unpack_token(buf: bytes) -> tuple[SymKey, int]:
    if len(buf) != TOKEN_PLAIN_BYTES:
        raise CodecError("token plaintext has wrong layout")
    return SymKey(buf[: crypto.KEY_BYTES]), int.from_bytes(buf[crypto.KEY_BYTES :], "big")


def seal_token_cgt(
    pk_c: bytes,
    k_cgt: SymKey,
    t1: int,
    *,
    rng: RandomSource | None = None,
    ops: OpCounter | None = None,
) -> bytes:
    """Seal (k_cgt, t1) to the consumer's public key."""
    return crypto.pk_encrypt(pk_c, k_cgt.data + t1.to_bytes(8, "big"), rng=rng, ops=ops)


def open_token_cgt(
    sk_c: bytes, blob: bytes, *, ops: OpCounter | None = None
) -> tuple[SymKey, int]:
    return _unpack_token(crypto.pk_decrypt(sk_c, blob, ops=ops))


def seal_token_n(
    key: SymKey,
    k_n: SymKey,
    t2: int,
    *,
    rng: RandomSource | None = None,
    ops: OpCounter | None = None,
) -> bytes:
    """Seal (k_n, t2) under a symmetric key.

    Used both for the namespace token (sealed under k_cgt) and for the
    password-mode sign-on token (sealed under the password-derived key);
    the plaintext layout is identical.
    """
    return crypto.sym_encrypt(key, k_n.data + t2.to_bytes(8, "big"), rng=rng, ops=ops)


def open_token_n(
    key: SymKey, blob: bytes, *, ops: OpCounter | None = None
) -> tuple[SymKey, int]:
    return _unpack_token(crypto.sym_decrypt(key, blob, ops=ops))
