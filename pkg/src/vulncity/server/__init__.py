"""Room-based realtime session service for shared scene exploration."""

from vulncity.server.rooms import (
    AVATAR_PALETTE,
    CLIENT_MESSAGE_FIELDS,
    SERVER_MESSAGE_FIELDS,
    Delivery,
    Participant,
    ProtocolError,
    Room,
    validate_client_message,
)

__all__ = [
    "AVATAR_PALETTE",
    "CLIENT_MESSAGE_FIELDS",
    "SERVER_MESSAGE_FIELDS",
    "Delivery",
    "Participant",
    "ProtocolError",
    "Room",
    "validate_client_message",
]
