"""Ticket-based authentication and namespace access control for private
content-centric networks.

The package splits into a small set of layers:

- :mod:`namegate.names` / :mod:`namegate.wire` — hierarchical content
  names, namespaces, and the binary interest/content codec.
- :mod:`namegate.crypto` — the narrow primitive set everything else
  builds on (AEAD, sealed boxes, password KDF, operation counting).
- :mod:`namegate.tickets` — sealed sign-on and namespace tickets plus
  the session-key tokens that accompany them.
- :mod:`namegate.forwarder` — a name-based router: longest-prefix
  forwarding, pending-interest aggregation, bounded content store.
- :mod:`namegate.services` — the sign-on service, the grant service,
  and ticket-checking content producers.
- :mod:`namegate.consumer` — the client: single sign-on, ticket cache,
  transparent re-authentication, optional mutual proof.
- :mod:`namegate.harness` — realm assembly from config files, three
  pluggable transports, benches, reports, and the CLI.
"""

from .consumer import Port, RealmClient, RestrictedEntry, TicketCache
from .crypto import DeterministicRandom, KeyPair, OpCounter, SymKey
from .errors import (
    AuthFail,
    BadName,
    BadNamespace,
    CgtInvalid,
    CodecError,
    ConfigError,
    ErrorCode,
    HashMismatch,
    NamegateError,
    NoProducer,
    NotAuthorized,
    ServiceError,
    TgtInvalid,
    Timeout,
)
from .forwarder import ContentStore, Fib, Pit, Router
from .names import (
    Name,
    Namespace,
    is_prefix,
    namespace_covers,
    namespace_matches,
    parse_name,
    parse_namespace,
)
from .services import (
    AuthServer,
    ContentProducer,
    FileSource,
    PkUser,
    PolicyStore,
    ProducerEntry,
    ProducerRegistry,
    PwdUser,
    SyntheticSource,
    TicketGrantingServer,
    UserStore,
)
from .wire import ContentObject, ErrorPayload, Interest

__version__ = "0.1.0"

__all__ = [
    "AuthFail",
    "AuthServer",
    "BadName",
    "BadNamespace",
    "CgtInvalid",
    "CodecError",
    "ConfigError",
    "ContentObject",
    "ContentProducer",
    "ContentStore",
    "DeterministicRandom",
    "ErrorCode",
    "ErrorPayload",
    "Fib",
    "FileSource",
    "HashMismatch",
    "Interest",
    "KeyPair",
    "Name",
    "NamegateError",
    "Namespace",
    "NoProducer",
    "NotAuthorized",
    "OpCounter",
    "Pit",
    "PkUser",
    "PolicyStore",
    "Port",
    "ProducerEntry",
    "ProducerRegistry",
    "PwdUser",
    "RealmClient",
    "RestrictedEntry",
    "Router",
    "ServiceError",
    "SymKey",
    "SyntheticSource",
    "TgtInvalid",
    "TicketCache",
    "TicketGrantingServer",
    "Timeout",
    "UserStore",
    "is_prefix",
    "namespace_covers",
    "namespace_matches",
    "parse_name",
    "parse_namespace",
    "__version__",
]
