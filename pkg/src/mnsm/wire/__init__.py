"""Name service plus reconnecting message sessions.

A single registry process maps service names to addresses so components
connect by name rather than by well-known hosts or ports.  Peers then talk
over direct TCP sessions carrying one JSON message per line, with
heartbeats for liveness: a peer silent for three liveness intervals is
declared dead and the session owner is told, whereupon clients re-resolve
and reconnect.
"""

from mnsm.wire.messages import (
    MalformedFrame,
    MissingField,
    UnknownType,
    WireError,
    WireMessage,
    decode_message,
    encode_message,
)
from mnsm.wire.registry import (
    RegistryClient,
    RegistryServer,
    RegistryUnreachable,
    ServiceRecord,
    registry_address,
)
from mnsm.wire.session import LivenessTracker, Session, SessionListener

__all__ = [
    "MalformedFrame",
    "MissingField",
    "UnknownType",
    "WireError",
    "WireMessage",
    "decode_message",
    "encode_message",
    "RegistryClient",
    "RegistryServer",
    "RegistryUnreachable",
    "ServiceRecord",
    "registry_address",
    "LivenessTracker",
    "Session",
    "SessionListener",
]
