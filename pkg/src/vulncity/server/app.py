"""WebSocket transport and static hosting around the Room state machine.

One ASGI app serves three things: the scene file (`/scene.json`), the wire
protocol (`/ws`), and the viewer assets when a built viewer directory is
available. All room mutations happen under one lock per hub so every room
sees a single serialized event order; pose messages are coalesced to the
latest per user and flushed at most once per interval per room.
"""

from __future__ import annotations

import asyncio
import json
import logging
import uuid
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, Response
from fastapi.staticfiles import StaticFiles

from vulncity.scene import SceneDocument, scene_from_json, scene_hash
from vulncity.server.rooms import Delivery, ProtocolError, Room, validate_client_message

logger = logging.getLogger("vulncity.server")

POSE_INTERVAL = 0.05

FALLBACK_PAGE = """<!doctype html>
<html><head><title>vulncity session server</title></head>
<body>
<h1>vulncity session server</h1>
<p>No viewer build found. Endpoints: <code>GET /scene.json</code>,
WebSocket <code>/ws</code>.</p>
</body></html>
"""


class _RoomPoseBuffer:
    """Latest pose per user, flushed at most once per interval per room."""

    def __init__(self) -> None:
        self.pending: dict[str, dict] = {}
        self.task: asyncio.Task | None = None
        self.last_flush = 0.0


class SessionHub:
    """Owns rooms, their sockets, pose coalescing, and empty-room expiry."""

    def __init__(
        self,
        scene_digest: str,
        overlay_keys: set[str],
        room_ttl: float = 300.0,
        pose_interval: float = POSE_INTERVAL,
    ) -> None:
        self.scene_digest = scene_digest
        self.overlay_keys = overlay_keys
        self.room_ttl = room_ttl
        self.pose_interval = pose_interval
        self.lock = asyncio.Lock()
        self.rooms: dict[str, Room] = {}
        self.sockets: dict[str, WebSocket] = {}
        self.user_room: dict[str, str] = {}
        self._pose_buffers: dict[str, _RoomPoseBuffer] = {}
        self._gc_tasks: dict[str, asyncio.Task] = {}

    async def dispatch(self, deliveries: list[Delivery]) -> None:
        for delivery in deliveries:
            for target in delivery.targets:
                socket = self.sockets.get(target)
                if socket is None:
                    continue
                try:
                    await socket.send_json(delivery.message)
                    if delivery.close:
                        await socket.close(code=4000)
                except Exception:
                    # A dying socket is cleaned up by its own receive loop.
                    logger.debug("send to %s failed", target, exc_info=True)

    async def join(self, websocket: WebSocket, user_id: str, message: dict) -> Room | None:
        async with self.lock:
            room_id = message["room"]
            room = self.rooms.get(room_id)
            if room is None:
                room = Room(room_id, self.scene_digest, self.overlay_keys)
                self.rooms[room_id] = room
                self._pose_buffers[room_id] = _RoomPoseBuffer()
            gc_task = self._gc_tasks.pop(room_id, None)
            if gc_task is not None:
                gc_task.cancel()
            self.sockets[user_id] = websocket
            deliveries = room.join(user_id, message["name"], message["sceneHash"])
            joined = user_id in room.members
            if joined:
                self.user_room[user_id] = room_id
                logger.info(
                    "join room=%s user=%s name=%s members=%d",
                    room_id,
                    user_id,
                    message["name"],
                    len(room.members),
                )
            await self.dispatch(deliveries)
            if not joined:
                self.sockets.pop(user_id, None)
                return None
            return room

    async def handle_pose(self, room: Room, user_id: str, message: dict) -> None:
        buffer = self._pose_buffers[room.room_id]
        buffer.pending[user_id] = message
        if buffer.task is None:
            now = asyncio.get_running_loop().time()
            delay = max(0.0, buffer.last_flush + self.pose_interval - now)
            buffer.task = asyncio.create_task(self._flush_poses(room, delay))

    async def _flush_poses(self, room: Room, delay: float) -> None:
        if delay > 0:
            await asyncio.sleep(delay)
        async with self.lock:
            buffer = self._pose_buffers.get(room.room_id)
            if buffer is None:
                return
            buffer.task = None
            buffer.last_flush = asyncio.get_running_loop().time()
            pending, buffer.pending = buffer.pending, {}
            deliveries: list[Delivery] = []
            for uid, message in pending.items():
                deliveries.extend(room.handle_pose(uid, message["head"], message["hands"]))
            await self.dispatch(deliveries)

    async def leave(self, user_id: str) -> None:
        async with self.lock:
            room_id = self.user_room.pop(user_id, None)
            self.sockets.pop(user_id, None)
            if room_id is None:
                return
            room = self.rooms.get(room_id)
            if room is None:
                return
            buffer = self._pose_buffers.get(room_id)
            if buffer is not None:
                buffer.pending.pop(user_id, None)
            deliveries = room.leave(user_id)
            logger.info(
                "leave room=%s user=%s members=%d", room_id, user_id, len(room.members)
            )
            await self.dispatch(deliveries)
            if room.is_empty:
                self._schedule_gc(room_id)

    def _schedule_gc(self, room_id: str) -> None:
        existing = self._gc_tasks.pop(room_id, None)
        if existing is not None:
            existing.cancel()
        if self.room_ttl <= 0:
            self._drop_room(room_id)
            return
        self._gc_tasks[room_id] = asyncio.create_task(self._gc_after(room_id))

    async def _gc_after(self, room_id: str) -> None:
        await asyncio.sleep(self.room_ttl)
        async with self.lock:
            room = self.rooms.get(room_id)
            if room is not None and room.is_empty:
                self._drop_room(room_id)
            self._gc_tasks.pop(room_id, None)

    def _drop_room(self, room_id: str) -> None:
        self.rooms.pop(room_id, None)
        buffer = self._pose_buffers.pop(room_id, None)
        if buffer is not None and buffer.task is not None:
            buffer.task.cancel()
        logger.info("room expired room=%s", room_id)


def load_scene_file(scene_path: Path) -> tuple[bytes, str, SceneDocument]:
    """Read, hash, and validate a scene file; raises ValueError when invalid."""
    scene_bytes = scene_path.read_bytes()
    document = scene_from_json(scene_bytes.decode("utf-8"))
    return scene_bytes, scene_hash(scene_bytes), document


def create_app(
    scene_path: Path,
    room_ttl: float = 300.0,
    viewer_dir: Path | None = None,
    pose_interval: float = POSE_INTERVAL,
) -> FastAPI:
    """Build the ASGI app for one scene file.

    Raises:
        ValueError: If the scene file fails validation (callers should refuse
            to bind a port in that case).
    """
    scene_bytes, scene_digest, document = load_scene_file(Path(scene_path))
    hub = SessionHub(
        scene_digest,
        overlay_keys=set(document.overlays),
        room_ttl=room_ttl,
        pose_interval=pose_interval,
    )

    app = FastAPI(title="vulncity session server")
    app.state.hub = hub
    app.state.scene_hash = scene_digest

    @app.get("/scene.json")
    def get_scene() -> Response:
        return Response(content=scene_bytes, media_type="application/json")

    @app.websocket("/ws")
    async def websocket_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        user_id = uuid.uuid4().hex[:12]
        room: Room | None = None
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    message = validate_client_message(json.loads(raw))
                except json.JSONDecodeError:
                    await websocket.send_json(
                        ProtocolError("bad-message", "payload is not valid JSON").to_message()
                    )
                    continue
                except ProtocolError as exc:
                    await websocket.send_json(exc.to_message())
                    continue

                mtype = message["type"]
                if room is None:
                    if mtype != "join":
                        await websocket.send_json(
                            ProtocolError("not-joined", "send join first").to_message()
                        )
                        continue
                    room = await hub.join(websocket, user_id, message)
                    if room is None:
                        return
                    continue

                if mtype == "join":
                    await websocket.send_json(
                        ProtocolError("bad-message", "already joined").to_message()
                    )
                elif mtype == "pose":
                    await hub.handle_pose(room, user_id, message)
                elif mtype == "toggleOverlay":
                    async with hub.lock:
                        await hub.dispatch(room.toggle_overlay(user_id, message["methodId"]))
                elif mtype == "follow":
                    async with hub.lock:
                        await hub.dispatch(room.set_follow(user_id, message.get("leaderId")))
                elif mtype == "leave":
                    await hub.leave(user_id)
                    await websocket.close()
                    return
        except WebSocketDisconnect:
            pass
        finally:
            await hub.leave(user_id)

    resolved_viewer = _resolve_viewer_dir(viewer_dir, Path(scene_path))
    if resolved_viewer is not None:
        app.mount("/", StaticFiles(directory=resolved_viewer, html=True), name="viewer")
    else:

        @app.get("/")
        def index() -> HTMLResponse:
            return HTMLResponse(FALLBACK_PAGE)

    return app


def _resolve_viewer_dir(viewer_dir: Path | None, scene_path: Path) -> Path | None:
    candidates = [viewer_dir] if viewer_dir is not None else []
    candidates.extend(
        base / "frontend" / "dist"
        for base in (Path.cwd(), scene_path.resolve().parent, scene_path.resolve().parent.parent)
    )
    for candidate in candidates:
        if candidate is not None and (candidate / "index.html").is_file():
            return candidate
    return None


__all__ = ["SessionHub", "create_app", "load_scene_file"]
