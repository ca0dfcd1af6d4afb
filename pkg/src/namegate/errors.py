"""Exception hierarchy and the closed set of protocol error codes.

Protocol error replies carry a one-byte code from ErrorCode plus a free-form
message. Everything else in the package raises a NamegateError subclass.
"""

from __future__ import annotations

import enum


class ErrorCode(enum.IntEnum):
    """Wire-level error codes carried in error reply payloads.

    The set is closed: peers must reject any other value.
    """

    UNKNOWN_USER = 1
    TGT_EXPIRED = 2
    TGT_INVALID = 3
    NOT_AUTHORIZED = 4
    CGT_EXPIRED = 5
    CGT_INVALID = 6
    PREFIX_MISMATCH = 7
    NO_CONTENT = 8
    CHALLENGE_FAILED = 9


class NamegateError(Exception):
    """Base class for every error raised by this package."""


class BadName(NamegateError):
    """Name text is malformed or violates a structural limit."""


class BadNamespace(BadName):
    """Namespace text is malformed (missing or non-terminal wildcard)."""


class CodecError(NamegateError):
    """Byte sequence is not a valid encoding (truncated, unknown field, ...)."""


class HashMismatch(CodecError):
    """Interest payload digest does not match the name's hash suffix."""


class AuthFail(NamegateError):
    """Authenticated decryption failed: wrong key, tampering, or truncation."""


class TgtInvalid(NamegateError):
    """A ticket-granting ticket failed authentication or parsing."""


class CgtInvalid(NamegateError):
    """A content-granting ticket failed authentication or parsing."""


class NotAuthorized(NamegateError):
    """No policy entry covers the requested namespace for this principal."""


class NoProducer(NamegateError):
    """No producer is registered for the requested namespace."""


class ServiceError(NamegateError):
    """A service replied with a protocol error payload."""

    def __init__(self, code: ErrorCode, message: str = ""):
        self.code = code
        self.message = message
        super().__init__(f"{code.name}: {message}" if message else code.name)


class Timeout(NamegateError):
    """No reply arrived within the request deadline."""


class ConfigError(NamegateError):
    """Realm configuration is missing a key or is internally inconsistent."""
