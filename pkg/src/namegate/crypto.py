"""Cryptographic primitives behind the ticket protocols.

Symmetric encryption is AES-256-GCM with a fresh random 24-byte nonce
carried in-band: output = nonce || ciphertext || 16-byte tag, so the
overhead is a constant 40 bytes. Public-key encryption is a sealed box
built from an ephemeral X25519 exchange, HKDF-SHA256, and the same AEAD:
output = ephemeral public key (32) || nonce (24) || ciphertext || tag (16),
a constant 72-byte overhead. Only the recipient's secret key decrypts and
any tampering fails authentication. Passwords are stretched with scrypt.

Every primitive takes an optional RandomSource (for reproducible runs) and
an optional OpCounter that tallies primitive invocations for the bench
reporter; both are safe to share between threads.
"""

from __future__ import annotations

import hashlib
import secrets
import threading
from dataclasses import dataclass, field
from typing import Protocol

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
)

from .errors import AuthFail

KEY_BYTES = 32
NONCE_BYTES = 24
TAG_BYTES = 16
SYM_OVERHEAD = NONCE_BYTES + TAG_BYTES
PK_OVERHEAD = 32 + SYM_OVERHEAD

_HKDF_LABEL = b"namegate sealed box v1"


class RandomSource(Protocol):
    """Anything that yields n random bytes on demand."""

    def bytes(self, n: int) -> bytes: ...


class SystemRandom:
    """Operating-system randomness."""

    def bytes(self, n: int) -> bytes:
        return secrets.token_bytes(n)


class DeterministicRandom:
    """SHA-256 counter stream for reproducible runs. Thread-safe."""

    def __init__(self, seed: bytes):
        self._seed = bytes(seed)
        self._counter = 0
        self._buffer = b""
        self._lock = threading.Lock()

    def bytes(self, n: int) -> bytes:
        with self._lock:
            while len(self._buffer) < n:
                block = hashlib.sha256(
                    self._seed + self._counter.to_bytes(8, "big")
                ).digest()
                self._counter += 1
                self._buffer += block
            out, self._buffer = self._buffer[:n], self._buffer[n:]
            return out


_system = SystemRandom()


@dataclass
class OpCounter:
    """Tallies primitive invocations; resettable per test or bench scope."""

    pk_enc: int = 0
    pk_dec: int = 0
    sym_enc: int = 0
    sym_dec: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def count(self, op: str) -> None:
        with self._lock:
            setattr(self, op, getattr(self, op) + 1)

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return {
                "pk_enc": self.pk_enc,
                "pk_dec": self.pk_dec,
                "sym_enc": self.sym_enc,
                "sym_dec": self.sym_dec,
            }

    def reset(self) -> None:
        with self._lock:
            self.pk_enc = self.pk_dec = self.sym_enc = self.sym_dec = 0


@dataclass(frozen=True)
class SymKey:
    """A 32-byte symmetric secret. repr never shows the key bytes."""

    data: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.data, bytes) or len(self.data) != KEY_BYTES:
            raise ValueError(f"symmetric keys are {KEY_BYTES} bytes")

    def __repr__(self) -> str:
        return "SymKey(<redacted>)"


@dataclass(frozen=True)
class KeyPair:
    """Raw X25519 key pair; both halves are 32 bytes."""

    public: bytes
    secret: bytes

    def __repr__(self) -> str:
        return f"KeyPair(public={self.public.hex()[:16]}..., secret=<redacted>)"


def random_key(rng: RandomSource | None = None) -> SymKey:
    """A fresh uniform symmetric key."""
    return SymKey((rng or _system).bytes(KEY_BYTES))


def random_nonce(
    bits: int = 256, rng: RandomSource | None = None
) -> bytes:
    """Uniform random bytes; bits must be a multiple of 8."""
    if bits % 8:
        raise ValueError("bits must be a multiple of 8")
    return (rng or _system).bytes(bits // 8)


def generate_keypair(
    rng: RandomSource | None = None,
) -> KeyPair:
    secret = X25519PrivateKey.from_private_bytes((rng or _system).bytes(32))
    return KeyPair(
        public=secret.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw),
        secret=secret.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption()),
    )


def sym_encrypt(
    key: SymKey,
    plaintext: bytes,
    *,
    rng: RandomSource | None = None,
    ops: OpCounter | None = None,
) -> bytes:
    if ops:
        ops.count("sym_enc")
    nonce = (rng or _system).bytes(NONCE_BYTES)
    return nonce + AESGCM(key.data).encrypt(nonce, plaintext, None)


def sym_decrypt(key: SymKey, blob: bytes, *, ops: OpCounter | None = None) -> bytes:
    if ops:
        ops.count("sym_dec")
    if len(blob) < SYM_OVERHEAD:
        raise AuthFail("ciphertext shorter than nonce plus tag")
    try:
        return AESGCM(key.data).decrypt(blob[:NONCE_BYTES], blob[NONCE_BYTES:], None)
    except (InvalidTag, ValueError) as exc:
        raise AuthFail("symmetric authentication failed") from exc


def _sealed_key(shared: bytes, eph_public: bytes, recipient_public: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(),
        length=KEY_BYTES,
        salt=None,
        info=_HKDF_LABEL + eph_public + recipient_public,
    ).derive(shared)


def pk_encrypt(
    public: bytes,
    plaintext: bytes,
    *,
    rng: RandomSource | None = None,
    ops: OpCounter | None = None,
) -> bytes:
    """Seal plaintext to a public key; anyone can seal, only sk opens."""
    if ops:
        ops.count("pk_enc")
    rng = rng or _system
    eph = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    eph_public = eph.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    shared = eph.exchange(X25519PublicKey.from_public_bytes(public))
    key = _sealed_key(shared, eph_public, public)
    nonce = rng.bytes(NONCE_BYTES)
    return eph_public + nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def pk_decrypt(secret: bytes, blob: bytes, *, ops: OpCounter | None = None) -> bytes:
    if ops:
        ops.count("pk_dec")
    if len(blob) < PK_OVERHEAD:
        raise AuthFail("sealed box shorter than its framing")
    eph_public = blob[:32]
    nonce = blob[32 : 32 + NONCE_BYTES]
    body = blob[32 + NONCE_BYTES :]
    try:
        sk = X25519PrivateKey.from_private_bytes(secret)
        shared = sk.exchange(X25519PublicKey.from_public_bytes(eph_public))
        my_public = sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        key = _sealed_key(shared, eph_public, my_public)
        return AESGCM(key).decrypt(nonce, body, None)
    except (InvalidTag, ValueError) as exc:
        raise AuthFail("sealed box authentication failed") from exc


def password_to_key(
    password: str, salt: bytes, *, n: int = 2**14, r: int = 8, p: int = 1
) -> SymKey:
    """Derive a symmetric key from a password with scrypt.

    Deterministic per (password, salt, cost); the realm fixes the cost
    parameters and stores the per-user salt.
    """
    if not password:
        raise ValueError("password must be non-empty")
    derived = Scrypt(salt=salt, length=KEY_BYTES, n=n, r=r, p=p).derive(
        password.encode("utf-8")
    )
    return SymKey(derived)
