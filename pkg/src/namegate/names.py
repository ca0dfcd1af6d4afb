"""Hierarchical content names and wildcard namespaces.

A Name is an ordered sequence of UTF-8 segments with canonical text form
``/seg1/seg2/...``. A Namespace is a Name prefix with an implicit terminal
wildcard, printed ``<prefix>/*``; it is the unit of access-control policy.
All prefix and coverage comparisons are segment-wise, never on raw text.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadName, BadNamespace

MAX_SEGMENTS = 64
MAX_ENCODED_BYTES = 4096

WILDCARD = "*"


@dataclass(frozen=True)
class Name:
    """An immutable hierarchical name; hashable, safe to share."""

    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise BadName("a name needs at least one segment")
        if len(self.segments) > MAX_SEGMENTS:
            raise BadName(f"too many segments ({len(self.segments)} > {MAX_SEGMENTS})")
        for seg in self.segments:
            if not isinstance(seg, str) or not seg:
                raise BadName("empty segment")
            if "/" in seg:
                raise BadName(f"segment contains '/': {seg!r}")
            if seg == WILDCARD:
                raise BadName("'*' is reserved for namespaces")
        if len(self.text.encode("utf-8")) > MAX_ENCODED_BYTES:
            raise BadName(f"encoded name exceeds {MAX_ENCODED_BYTES} bytes")

    @property
    def text(self) -> str:
        """Canonical text form."""
        return "/" + "/".join(self.segments)

    def append(self, *segments: str) -> Name:
        """A new Name with extra segments on the end."""
        return Name(self.segments + segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __str__(self) -> str:
        return self.text

    def __repr__(self) -> str:
        return f"Name({self.text!r})"


@dataclass(frozen=True)
class Namespace:
    """A Name prefix with an implicit terminal wildcard."""

    prefix: Name

    @property
    def text(self) -> str:
        return self.prefix.text + "/" + WILDCARD

    def __str__(self) -> str:
        return self.text

    def __repr__(self) -> str:
        return f"Namespace({self.text!r})"


def parse_name(text: str) -> Name:
    """Parse canonical name text.

    Rejects empty input, missing leading slash, empty segments, and wildcard
    segments. Parsing then printing is the identity on canonical forms.
    """
    if not isinstance(text, str) or not text:
        raise BadName("empty name text")
    if not text.startswith("/"):
        raise BadName(f"name must start with '/': {text!r}")
    if text == "/":
        raise BadName("a name needs at least one segment")
    return Name(tuple(text[1:].split("/")))


def parse_namespace(text: str) -> Namespace:
    """Parse namespace text of the form ``<canonical name>/*``.

    The wildcard must be present, terminal, and unique; an embedded ``*``
    segment anywhere else is rejected.
    """
    if not isinstance(text, str) or not text:
        raise BadNamespace("empty namespace text")
    if not text.endswith("/" + WILDCARD):
        raise BadNamespace(f"namespace must end with '/*': {text!r}")
    prefix_text = text[: -len("/" + WILDCARD)]
    try:
        prefix = parse_name(prefix_text)
    except BadNamespace:
        raise
    except BadName as exc:
        raise BadNamespace(f"bad namespace prefix: {exc}") from exc
    return Namespace(prefix)


def is_prefix(short: Name, long: Name) -> bool:
    """True iff short's segments equal the first len(short) segments of long."""
    if len(short.segments) > len(long.segments):
        return False
    return long.segments[: len(short.segments)] == short.segments


def namespace_matches(ns: Namespace, name: Name) -> bool:
    """True iff name falls under the namespace (segment-wise prefix)."""
    return is_prefix(ns.prefix, name)


def namespace_covers(policy: Namespace, requested: Namespace) -> bool:
    """True iff every name under requested also falls under policy."""
    return is_prefix(policy.prefix, requested.prefix)
