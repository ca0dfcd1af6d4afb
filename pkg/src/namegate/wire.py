"""Interest/ContentObject messages and the binary codec.

Encoding is a minimal deterministic TLV: one message-type byte (0x01
interest, 0x02 content object) followed by fields as (1-byte field id,
4-byte big-endian length, value) in strictly ascending id order. Optional
fields are omitted when empty; a content object always carries its expiry
field, even when zero (zero means do-not-cache). The same format is the
wire protocol for both the in-process transport and stream sockets, where
each message travels in one 4-byte big-endian length-prefixed frame.

A payload-bearing interest must end with a ``h=<hex digest>`` name segment
committing to its payload; decode enforces this.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from .errors import CodecError, ErrorCode, HashMismatch
from .names import Name, parse_name

TYPE_INTEREST = 0x01
TYPE_CONTENT = 0x02

FIELD_NAME = 0x01
FIELD_PAYLOAD = 0x02
FIELD_EXPIRY = 0x03
FIELD_VALIDATION = 0x04

DEFAULT_DIGEST = "sha256"

_HASH_SEGMENT = re.compile(r"^h=(?:[0-9a-f]{2}){16,64}$")


@dataclass(frozen=True)
class Interest:
    """A request for named content; payload is empty unless the request
    carries protocol material (credentials, tickets, challenge replies)."""

    name: Name
    payload: bytes = b""


@dataclass(frozen=True)
class ContentObject:
    """A reply carrying named payload.

    expiry_time is an absolute instant in seconds since the epoch; zero
    forbids caching. validation is carried opaquely and never interpreted.
    """

    name: Name
    payload: bytes = b""
    expiry_time: int = 0
    validation: bytes = b""


@dataclass(frozen=True)
class ErrorPayload:
    """Protocol error carried inside a content object payload."""

    code: ErrorCode
    message: str = ""


def digest_payload(payload: bytes, algo: str = DEFAULT_DIGEST) -> str:
    """Lowercase hex digest used for interest hash suffixes."""
    return hashlib.new(algo, payload).hexdigest()


def hash_segment(payload: bytes, algo: str = DEFAULT_DIGEST) -> str:
    return "h=" + digest_payload(payload, algo)


def attach_payload(base_name: Name, payload: bytes, algo: str = DEFAULT_DIGEST) -> Interest:
    """Build a payload-bearing interest: base name plus the hash suffix."""
    if not payload:
        raise ValueError("attach_payload requires a non-empty payload")
    return Interest(base_name.append(hash_segment(payload, algo)), payload)


def has_hash_suffix(name: Name) -> bool:
    return bool(_HASH_SEGMENT.match(name.segments[-1]))


def strip_hash_suffix(name: Name) -> Name:
    """Drop the terminal hash segment, if present."""
    if len(name.segments) > 1 and has_hash_suffix(name):
        return Name(name.segments[:-1])
    return name


def _tlv(field_id: int, value: bytes) -> bytes:
    if len(value) > 0xFFFFFFFF:
        raise CodecError("field too long")
    return bytes([field_id]) + len(value).to_bytes(4, "big") + value


def encode(msg: Interest | ContentObject) -> bytes:
    """Deterministic encoding; assumes message invariants hold."""
    if isinstance(msg, Interest):
        out = bytes([TYPE_INTEREST]) + _tlv(FIELD_NAME, msg.name.text.encode("utf-8"))
        if msg.payload:
            out += _tlv(FIELD_PAYLOAD, msg.payload)
        return out
    if isinstance(msg, ContentObject):
        out = bytes([TYPE_CONTENT]) + _tlv(FIELD_NAME, msg.name.text.encode("utf-8"))
        if msg.payload:
            out += _tlv(FIELD_PAYLOAD, msg.payload)
        out += _tlv(FIELD_EXPIRY, msg.expiry_time.to_bytes(8, "big"))
        if msg.validation:
            out += _tlv(FIELD_VALIDATION, msg.validation)
        return out
    raise TypeError(f"cannot encode {type(msg).__name__}")


def _read_fields(buf: bytes) -> dict[int, bytes]:
    # Strictly ascending field ids give every message exactly one encoding.
    fields: dict[int, bytes] = {}
    pos = 0
    last_id = 0
    while pos < len(buf):
        if pos + 5 > len(buf):
            raise CodecError("truncated field header")
        fid = buf[pos]
        if fid not in (FIELD_NAME, FIELD_PAYLOAD, FIELD_EXPIRY, FIELD_VALIDATION):
            raise CodecError(f"unknown field id {fid:#x}")
        if fid <= last_id:
            raise CodecError("field ids must be strictly ascending")
        length = int.from_bytes(buf[pos + 1 : pos + 5], "big")
        pos += 5
        if pos + length > len(buf):
            raise CodecError("field length overflows buffer")
        fields[fid] = buf[pos : pos + length]
        pos += length
        last_id = fid
    return fields


def _decode_name(fields: dict[int, bytes]) -> Name:
    if FIELD_NAME not in fields:
        raise CodecError("missing name field")
    try:
        text = fields[FIELD_NAME].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CodecError("name is not valid UTF-8") from exc
    name = parse_name(text)
    if name.text != text:
        raise CodecError("name text is not canonical")
    return name


def decode(data: bytes, algo: str = DEFAULT_DIGEST) -> Interest | ContentObject:
    """Inverse of encode; validates names and the payload-hash suffix rule."""
    if not data:
        raise CodecError("empty buffer")
    msg_type = data[0]
    if msg_type not in (TYPE_INTEREST, TYPE_CONTENT):
        raise CodecError(f"unknown message type {msg_type:#x}")
    fields = _read_fields(data[1:])
    name = _decode_name(fields)
    if msg_type == TYPE_INTEREST:
        if FIELD_EXPIRY in fields or FIELD_VALIDATION in fields:
            raise CodecError("interest carries content-object fields")
        payload = fields.get(FIELD_PAYLOAD, b"")
        if payload == b"":
            if FIELD_PAYLOAD in fields:
                raise CodecError("empty payload field must be omitted")
            # the suffix shape is reserved: without a payload to commit to,
            # a hash-suffixed name is the mark of a truncated message
            if has_hash_suffix(name):
                raise CodecError("hash-suffixed interest is missing its payload")
        else:
            if name.segments[-1] != hash_segment(payload, algo):
                raise HashMismatch("payload digest does not match name suffix")
        return Interest(name, payload)
    if FIELD_EXPIRY not in fields:
        raise CodecError("content object is missing its expiry field")
    raw_expiry = fields[FIELD_EXPIRY]
    if len(raw_expiry) != 8:
        raise CodecError("expiry field must be 8 bytes")
    payload = fields.get(FIELD_PAYLOAD, b"")
    if payload == b"" and FIELD_PAYLOAD in fields:
        raise CodecError("empty payload field must be omitted")
    validation = fields.get(FIELD_VALIDATION, b"")
    if validation == b"" and FIELD_VALIDATION in fields:
        raise CodecError("empty validation field must be omitted")
    return ContentObject(name, payload, int.from_bytes(raw_expiry, "big"), validation)


def encode_error(err: ErrorPayload) -> bytes:
    return bytes([err.code]) + err.message.encode("utf-8")


def parse_error(payload: bytes) -> ErrorPayload:
    """Parse an error payload; raises CodecError if it is not one."""
    if not payload:
        raise CodecError("empty error payload")
    try:
        code = ErrorCode(payload[0])
    except ValueError as exc:
        raise CodecError(f"unknown error code {payload[0]}") from exc
    try:
        message = payload[1:].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CodecError("error message is not valid UTF-8") from exc
    return ErrorPayload(code, message)


def pack_pair(first: bytes, second: bytes) -> bytes:
    """Join two byte strings with 2-byte length framing between them."""
    if len(first) > 0xFFFF:
        raise CodecError("first part too long for 2-byte framing")
    return len(first).to_bytes(2, "big") + first + second


def split_pair(buf: bytes) -> tuple[bytes, bytes]:
    if len(buf) < 2:
        raise CodecError("buffer too short for 2-byte framing")
    n = int.from_bytes(buf[:2], "big")
    if 2 + n > len(buf):
        raise CodecError("framed part overflows buffer")
    return buf[2:2 + n], buf[2 + n:]
