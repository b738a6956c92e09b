"""WebSocket bridge: the wire protocol mirrored as JSON for browser clients.

Runs an asyncio websockets server on its own thread, attached to a running
Server. JSON frames mirror the binary messages name-for-name:

    {"type": "hello", "role": "commander"|"observer", "state_rate_hz": 30}
    {"type": "command", "timestamp_us": ..., "targets": [19 floats]}
    {"type": "state", "timestamp_us": ..., "q": [...], "dq": [...]}
    {"type": "heartbeat", "timestamp_us": ...}
    {"type": "error", "code": ..., "text": "..."}

Two console-facing additions:

* {"type": "link_poses", "timestamp_us": ..., "poses": {frame: {"p": [3],
  "q": [4 wxyz]}}} broadcast at 30 Hz, computed server-side via forward
  kinematics so clients need no kinematics of their own.
* {"type": "tracking", ...stream-v1 record...} frames are validated and
  relayed to clients that sent {"type": "subscribe", "topics": ["tracking"]},
  which is how a live teleop session consumes console input.

Schema-invalid text frames get an error reply; the connection stays open.
"""

from __future__ import annotations

import asyncio
import json
import threading

import numpy as np

from . import wire
from .se3 import Quat
from .server import Server
from .streams import SchemaError, parse_record

ROLE_NAMES = {"commander": wire.ROLE_COMMANDER, "observer": wire.ROLE_OBSERVER}


def state_to_json(msg: wire.State) -> dict:
    return {"type": "state", "timestamp_us": msg.timestamp_us,
            "q": list(msg.q), "dq": list(msg.dq)}


def message_to_json(msg) -> dict:
    if isinstance(msg, wire.State):
        return state_to_json(msg)
    if isinstance(msg, wire.Hello):
        role = "commander" if msg.role == wire.ROLE_COMMANDER else "observer"
        return {"type": "hello", "role": role, "state_rate_hz": msg.state_rate_hz}
    if isinstance(msg, wire.Error):
        return {"type": "error", "code": msg.code, "text": msg.text}
    if isinstance(msg, wire.Heartbeat):
        return {"type": "heartbeat", "timestamp_us": msg.timestamp_us}
    raise TypeError(f"no JSON mirror for {type(msg).__name__}")


class WsBridge:
    """Bridge endpoint bound to a Server; serves `/ws` (any path accepted)."""

    LINK_POSE_PERIOD_S = 1.0 / 30.0

    def __init__(self, server: Server, port: int = 0):
        self.server = server
        self.requested_port = port
        self.port = None
        self._loop = None
        self._thread = None
        self._ready = threading.Event()
        self._stop_ev = None
        self._next_conn_id = 1_000_000  # distinct from TCP connection ids
        self._tracking_subs: set = set()
        self._outboxes: set = set()
        self.tracking_log: list[dict] = []

    # -- lifecycle ------------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self._run, daemon=True, name="wsbridge")
        self._thread.start()
        if not self._ready.wait(timeout=10):
            raise RuntimeError("websocket bridge failed to start")
        return self

    def stop(self):
        if self._loop is not None:
            self._loop.call_soon_threadsafe(self._stop_ev.set)
            self._thread.join(timeout=5)

    def _run(self):
        asyncio.run(self._main())

    async def _main(self):
        import websockets

        self._loop = asyncio.get_running_loop()
        self._stop_ev = asyncio.Event()
        async with websockets.serve(self._handler, "127.0.0.1",
                                    self.requested_port) as ws_server:
            self.port = list(ws_server.sockets)[0].getsockname()[1]
            poses_task = asyncio.create_task(self._link_pose_loop())
            self._ready.set()
            await self._stop_ev.wait()
            poses_task.cancel()

    # -- per-connection handling ------------------------------------------------

    async def _handler(self, ws):
        conn_id = self._next_conn_id
        self._next_conn_id += 1
        outbox: asyncio.Queue = asyncio.Queue(maxsize=4096)
        self._outboxes.add(outbox)
        loop = self._loop

        def send_from_core(msg):
            # called from TCP/control threads under the server lock
            try:
                payload = json.dumps(message_to_json(msg))
            except TypeError:
                return
            loop.call_soon_threadsafe(self._enqueue, outbox, payload)

        sender = asyncio.create_task(self._sender(ws, outbox))
        registered = False
        try:
            async for raw in ws:
                reply = self._handle_text(conn_id, raw, send_from_core, outbox)
                registered = registered or reply
        except Exception:
            pass
        finally:
            sender.cancel()
            self._tracking_subs.discard(outbox)
            self._outboxes.discard(outbox)
            with self.server.lock:
                self.server.core.drop_client(conn_id)

    @staticmethod
    def _enqueue(outbox: asyncio.Queue, payload: str):
        try:
            outbox.put_nowait(payload)
        except asyncio.QueueFull:
            pass  # slow browser: shed load rather than stall the core

    async def _sender(self, ws, outbox: asyncio.Queue):
        while True:
            payload = await outbox.get()
            await ws.send(payload)

    def _handle_text(self, conn_id, raw, send_from_core, outbox) -> bool:
        """Parse and dispatch one inbound JSON frame; error replies stay on
        the same connection. Returns True when the frame registered a role."""

        def reply_error(code, text):
            self._enqueue(outbox, json.dumps(
                {"type": "error", "code": code, "text": text}))

        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as exc:
            reply_error(wire.ERR_MALFORMED, f"not JSON: {exc}")
            return False
        mtype = msg.get("type")
        if mtype == "hello":
            role = ROLE_NAMES.get(msg.get("role"))
            if role is None:
                reply_error(wire.ERR_MALFORMED, f"unknown role {msg.get('role')!r}")
                return False
            rate = int(msg.get("state_rate_hz", 30) or 30)
            with self.server.lock:
                self.server.core.add_client(conn_id, wire.Hello(role, rate),
                                            send_from_core)
            return True
        if mtype == "command":
            targets = msg.get("targets")
            if not isinstance(targets, list) or len(targets) != wire.N_JOINTS:
                reply_error(wire.ERR_MALFORMED,
                            f"targets: expected {wire.N_JOINTS} floats")
                return False
            cmd = wire.Command(int(msg.get("timestamp_us", 0)),
                               tuple(float(v) for v in targets))
            with self.server.lock:
                self.server.core.handle(conn_id, cmd)
            return False
        if mtype == "tracking":
            try:
                parse_record(msg, line=len(self.tracking_log) + 1)
            except SchemaError as exc:
                reply_error(wire.ERR_MALFORMED, str(exc).split(": ", 1)[1])
                return False
            self.tracking_log.append(msg)
            payload = json.dumps(msg)
            for sub in list(self._tracking_subs):
                self._enqueue(sub, payload)
            return False
        if mtype == "tracking_eof":
            payload = json.dumps({"type": "tracking_eof"})
            for sub in list(self._tracking_subs):
                self._enqueue(sub, payload)
            return False
        if mtype == "subscribe":
            if "tracking" in (msg.get("topics") or []):
                self._tracking_subs.add(outbox)
            return False
        if mtype == "heartbeat":
            return False
        reply_error(wire.ERR_MALFORMED, f"unknown message type {mtype!r}")
        return False

    # -- broadcast tasks ----------------------------------------------------------

    async def _link_pose_loop(self):
        while True:
            await asyncio.sleep(self.LINK_POSE_PERIOD_S)
            with self.server.lock:
                poses = self.server.core.link_poses()
                t_us = self.server.core.now_us
            payload = json.dumps({
                "type": "link_poses",
                "timestamp_us": t_us,
                "poses": {
                    name: {
                        "p": [float(v) for v in T[:3, 3]],
                        "q": _quat_wxyz(T[:3, :3]),
                    } for name, T in poses.items()
                },
            })
            for q in list(self._outboxes):
                self._enqueue(q, payload)


def _quat_wxyz(R) -> list:
    q = Quat.from_matrix(np.asarray(R))
    return [q.w, q.x, q.y, q.z]
