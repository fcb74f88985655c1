"""Deterministic room state machine for collaborative scene exploration.

A Room applies client events in one serialized order and returns the exact
messages to deliver, each broadcast stamped with a per-room monotone sequence
number. Transport concerns (sockets, pose coalescing, garbage collection
timers) live in the ASGI layer; everything here is pure state so the protocol
can be simulated and replayed in tests without I/O.

Authority split: the server owns positions (a follower's position is pinned
to its leader), clients own their head orientation. Panels are client-local
by design: no message schema has a panel field.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Any

AVATAR_PALETTE: tuple[dict[str, float], ...] = tuple(
    {"r": r, "g": g, "b": b, "a": 1.0}
    for r, g, b in (
        (0.9, 0.15, 0.15),
        (0.15, 0.5, 0.9),
        (0.15, 0.8, 0.25),
        (0.95, 0.8, 0.1),
        (0.75, 0.2, 0.8),
        (0.1, 0.8, 0.8),
        (0.95, 0.5, 0.1),
        (0.6, 0.45, 0.3),
    )
)

ORIGIN_POSE: dict[str, list[float]] = {"p": [0.0, 0.0, 0.0], "q": [0.0, 0.0, 0.0, 1.0]}

# Exhaustive wire schemas: allowed top-level fields per message type and
# direction. Tests assert every emitted message matches, and that no type or
# field carries panel or teleport state.
CLIENT_MESSAGE_FIELDS: dict[str, frozenset[str]] = {
    "join": frozenset({"type", "room", "name", "sceneHash"}),
    "pose": frozenset({"type", "head", "hands"}),
    "toggleOverlay": frozenset({"type", "methodId"}),
    "follow": frozenset({"type", "leaderId"}),
    "leave": frozenset({"type"}),
}
SERVER_MESSAGE_FIELDS: dict[str, frozenset[str]] = {
    "welcome": frozenset({"type", "selfId", "seq", "snapshot"}),
    "join": frozenset({"type", "seq", "userId", "name", "color", "head", "hands"}),
    "presence": frozenset({"type", "seq", "userId", "head", "hands", "resolvedPosition"}),
    "overlayState": frozenset({"type", "seq", "active"}),
    "followState": frozenset({"type", "seq", "follows"}),
    "leave": frozenset({"type", "seq", "userId"}),
    "error": frozenset({"type", "code", "message"}),
}


class ProtocolError(Exception):
    """Client-visible protocol violation; becomes an error message."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code
        self.message = message

    def to_message(self) -> dict[str, Any]:
        return {"type": "error", "code": self.code, "message": self.message}


def validate_client_message(obj: Any) -> dict[str, Any]:
    """Shape-check one inbound message; returns it on success.

    Raises:
        ProtocolError: code "bad-message" for anything outside the schema.
    """
    if not isinstance(obj, dict) or not isinstance(obj.get("type"), str):
        raise ProtocolError("bad-message", "message must be an object with a string 'type'")
    mtype = obj["type"]
    allowed = CLIENT_MESSAGE_FIELDS.get(mtype)
    if allowed is None:
        raise ProtocolError("bad-message", f"unknown message type {mtype!r}")
    extra = set(obj) - allowed
    if extra:
        raise ProtocolError("bad-message", f"{mtype} carries unsupported fields {sorted(extra)}")
    if mtype == "join":
        for key in ("room", "name", "sceneHash"):
            if not isinstance(obj.get(key), str) or not obj[key]:
                raise ProtocolError("bad-message", f"join requires non-empty string {key!r}")
    elif mtype == "pose":
        _validate_pose_payload(obj)
    elif mtype == "toggleOverlay":
        if not isinstance(obj.get("methodId"), str) or not obj["methodId"]:
            raise ProtocolError("bad-message", "toggleOverlay requires a methodId string")
    elif mtype == "follow":
        leader = obj.get("leaderId")
        if leader is not None and (not isinstance(leader, str) or not leader):
            raise ProtocolError("bad-message", "follow leaderId must be a user id or null")
    return obj


def _validate_pose_payload(obj: dict[str, Any]) -> None:
    head = obj.get("head")
    hands = obj.get("hands")
    if not _is_pose(head):
        raise ProtocolError("bad-message", "pose.head must be {p:[x,y,z], q:[x,y,z,w]}")
    if not (isinstance(hands, list) and len(hands) == 2 and all(_is_pose(h) for h in hands)):
        raise ProtocolError("bad-message", "pose.hands must be two {p, q} entries")
    for pose in (head, *hands):
        norm = math.hypot(*pose["q"])
        if abs(norm - 1.0) > 1e-6:
            raise ProtocolError("bad-message", "pose orientation must be a unit quaternion")


def _is_pose(value: Any) -> bool:
    if not isinstance(value, dict) or set(value) != {"p", "q"}:
        return False
    p, q = value["p"], value["q"]
    return (
        isinstance(p, list)
        and len(p) == 3
        and all(isinstance(v, (int, float)) and math.isfinite(v) for v in p)
        and isinstance(q, list)
        and len(q) == 4
        and all(isinstance(v, (int, float)) and math.isfinite(v) for v in q)
    )


@dataclass(frozen=True)
class Delivery:
    """One outbound message and who receives it; close=True tells the
    transport to drop those connections after sending."""

    targets: tuple[str, ...]
    message: dict[str, Any]
    close: bool = False


@dataclass
class Participant:
    user_id: str
    name: str
    color: dict[str, float]
    head: dict[str, list[float]] = field(default_factory=lambda: copy.deepcopy(ORIGIN_POSE))
    hands: list[dict[str, list[float]]] = field(
        default_factory=lambda: [copy.deepcopy(ORIGIN_POSE), copy.deepcopy(ORIGIN_POSE)]
    )


class Room:
    """Authoritative state for one session; all events serialized by caller."""

    def __init__(self, room_id: str, scene_hash: str, overlay_keys: set[str]) -> None:
        self.room_id = room_id
        self.scene_hash = scene_hash
        self.overlay_keys = set(overlay_keys)
        self._participants: dict[str, Participant] = {}
        self._active_overlays: set[str] = set()
        self._follows: dict[str, str] = {}
        self._seq = 0
        self._joined_total = 0

    # --- introspection ------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return not self._participants

    @property
    def members(self) -> tuple[str, ...]:
        return tuple(self._participants)

    @property
    def seq(self) -> int:
        return self._seq

    def snapshot(self) -> dict[str, Any]:
        """Complete room state: a late joiner applying this plus every later
        broadcast reconstructs exactly what long-lived clients hold."""
        return {
            "sceneHash": self.scene_hash,
            "participants": [
                {
                    "userId": p.user_id,
                    "name": p.name,
                    "color": copy.deepcopy(p.color),
                    "head": copy.deepcopy(p.head),
                    "hands": copy.deepcopy(p.hands),
                }
                for p in self._participants.values()
            ],
            "active": sorted(self._active_overlays),
            "follows": dict(sorted(self._follows.items())),
        }

    # --- events -------------------------------------------------------------

    def join(self, user_id: str, name: str, client_scene_hash: str) -> list[Delivery]:
        if user_id in self._participants:
            raise ValueError(f"duplicate user id {user_id!r}")
        if client_scene_hash != self.scene_hash:
            return [
                Delivery(
                    (user_id,),
                    ProtocolError(
                        "scene-mismatch",
                        "client scene hash does not match the served scene",
                    ).to_message(),
                    close=True,
                )
            ]
        color = AVATAR_PALETTE[self._joined_total % len(AVATAR_PALETTE)]
        self._joined_total += 1
        participant = Participant(user_id=user_id, name=name, color=dict(color))
        others = self.members
        self._participants[user_id] = participant
        announcement = self._stamped(
            {
                "type": "join",
                "userId": user_id,
                "name": name,
                "color": dict(participant.color),
                "head": copy.deepcopy(participant.head),
                "hands": copy.deepcopy(participant.hands),
            }
        )
        welcome = {
            "type": "welcome",
            "selfId": user_id,
            "seq": self._seq,
            "snapshot": self.snapshot(),
        }
        return [Delivery(others, announcement), Delivery((user_id,), welcome)]

    def handle_pose(
        self,
        user_id: str,
        head: dict[str, list[float]],
        hands: list[dict[str, list[float]]],
    ) -> list[Delivery]:
        participant = self._participants.get(user_id)
        if participant is None:
            return [self._error_to(user_id, "not-joined", "send join before pose")]
        participant.head = copy.deepcopy(head)
        participant.hands = copy.deepcopy(hands)
        leader = self._terminal_leader(user_id)
        if leader is not None:
            # Position is server-resolved to the leader; orientation stays
            # the client's own.
            participant.head["p"] = copy.deepcopy(self._participants[leader].head["p"])
        deliveries = [self._presence_delivery(user_id)]
        deliveries.extend(self._sync_followers(user_id))
        return deliveries

    def toggle_overlay(self, user_id: str, method_id: str) -> list[Delivery]:
        if user_id not in self._participants:
            return [self._error_to(user_id, "not-joined", "send join before toggleOverlay")]
        if method_id not in self.overlay_keys:
            return [
                self._error_to(user_id, "unknown-method", f"no overlay for method {method_id!r}")
            ]
        if method_id in self._active_overlays:
            self._active_overlays.discard(method_id)
        else:
            self._active_overlays.add(method_id)
        message = self._stamped({"type": "overlayState", "active": sorted(self._active_overlays)})
        return [Delivery(self.members, message)]

    def set_follow(self, follower_id: str, leader_id: str | None) -> list[Delivery]:
        if follower_id not in self._participants:
            return [self._error_to(follower_id, "not-joined", "send join before follow")]
        if leader_id is None:
            self._follows.pop(follower_id, None)
            return [self._follow_state_delivery()]
        if leader_id == follower_id:
            return [self._error_to(follower_id, "self-follow", "cannot follow yourself")]
        if leader_id not in self._participants:
            return [
                self._error_to(follower_id, "unknown-leader", f"no such user {leader_id!r}")
            ]
        if self._would_cycle(follower_id, leader_id):
            return [
                self._error_to(
                    follower_id, "follow-cycle", f"{leader_id!r} already follows {follower_id!r}"
                )
            ]
        self._follows[follower_id] = leader_id
        # Snap immediately so every subsequent broadcast satisfies
        # position(follower) == position(leader).
        self._participants[follower_id].head["p"] = copy.deepcopy(
            self._participants[leader_id].head["p"]
        )
        deliveries = [self._follow_state_delivery(), self._presence_delivery(follower_id)]
        deliveries.extend(self._sync_followers(follower_id))
        return deliveries

    def leave(self, user_id: str) -> list[Delivery]:
        if user_id not in self._participants:
            return []
        del self._participants[user_id]
        follows_changed = self._follows.pop(user_id, None) is not None
        for follower, leader in list(self._follows.items()):
            if leader == user_id:
                del self._follows[follower]
                follows_changed = True
        deliveries = [Delivery(self.members, self._stamped({"type": "leave", "userId": user_id}))]
        if follows_changed:
            deliveries.append(self._follow_state_delivery())
        return deliveries

    # --- helpers ------------------------------------------------------------

    def _stamped(self, message: dict[str, Any]) -> dict[str, Any]:
        self._seq += 1
        message["seq"] = self._seq
        return message

    def _error_to(self, user_id: str, code: str, text: str) -> Delivery:
        return Delivery((user_id,), ProtocolError(code, text).to_message())

    def _presence_delivery(self, user_id: str) -> Delivery:
        participant = self._participants[user_id]
        message = {
            "type": "presence",
            "userId": user_id,
            "head": copy.deepcopy(participant.head),
            "hands": copy.deepcopy(participant.hands),
        }
        if user_id in self._follows:
            message["resolvedPosition"] = copy.deepcopy(participant.head["p"])
        targets = tuple(uid for uid in self._participants if uid != user_id)
        return Delivery(targets, self._stamped(message))

    def _sync_followers(self, moved_id: str) -> list[Delivery]:
        """Pin every transitive follower of the moved user to its position
        and broadcast their updated presences."""
        position = self._participants[moved_id].head["p"]
        deliveries = []
        for follower in self._transitive_followers(moved_id):
            self._participants[follower].head["p"] = copy.deepcopy(position)
            deliveries.append(self._presence_delivery(follower))
        return deliveries

    def _follow_state_delivery(self) -> Delivery:
        message = self._stamped(
            {"type": "followState", "follows": dict(sorted(self._follows.items()))}
        )
        return Delivery(self.members, message)

    def _terminal_leader(self, user_id: str) -> str | None:
        current = user_id
        seen = {user_id}
        while current in self._follows:
            current = self._follows[current]
            if current in seen:
                return None
            seen.add(current)
        return None if current == user_id else current

    def _would_cycle(self, follower_id: str, leader_id: str) -> bool:
        current: str | None = leader_id
        seen = set()
        while current is not None and current not in seen:
            if current == follower_id:
                return True
            seen.add(current)
            current = self._follows.get(current)
        return False

    def _transitive_followers(self, user_id: str) -> list[str]:
        followers: list[str] = []
        frontier = [user_id]
        seen = {user_id}
        while frontier:
            nxt: list[str] = []
            direct = sorted(
                f for f, leader in self._follows.items() if leader in frontier and f not in seen
            )
            for follower in direct:
                seen.add(follower)
                followers.append(follower)
                nxt.append(follower)
            frontier = nxt
        return followers
