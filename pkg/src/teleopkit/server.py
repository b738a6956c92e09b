"""Robot I/O server: a simulated 19-DOF arm+hand plant behind the framed
wire protocol.

The plant runs a 1 kHz loop: incoming joint targets re-target per-axis
jerk-limited generators (trajgen), the plant integrates the sampled
velocities with position clamping at the model limits, and state messages
fan out to subscribers at their requested rates.

Two modes share one core state machine:

* realtime: a control thread ticks the plant on the wall clock; network
  readers feed it through a bounded drop-oldest command queue.
* deterministic: there is no control thread. The virtual clock advances only
  when the single commander sends a command stamped with a later timestamp;
  the server replies to every command with the plant state at that timestamp
  before the command takes effect. Byte-identical runs follow from the
  command stream alone.

One commander at a time; any number of observers.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import wire
from .kinematics import KinematicModel
from .trajgen import Bridge, Limits

DEFAULT_PORT = 47853
DEFAULT_WS_PORT = 47854
DEFAULT_STATE_RATE = 30
MAX_STATE_RATE = 1000
DEFAULT_LIMITS = Limits(v_max=2.0, a_max=10.0, j_max=1000.0)


@dataclass
class Subscriber:
    conn_id: int
    role: int
    rate_hz: int
    next_due_us: int
    send: object  # callable(bytes or message) -> None
    is_json: bool = False


@dataclass
class CoreStats:
    commands: int = 0
    states_sent: int = 0
    malformed: int = 0
    timeouts: int = 0


class ServerCore:
    """Mode-agnostic plant + subscription state machine.

    All methods must be called under the owning server's lock (or from the
    single control thread). Methods return nothing; outbound traffic goes
    through each subscriber's send callable.
    """

    def __init__(self, model: KinematicModel, limits=DEFAULT_LIMITS,
                 deterministic: bool = False):
        if model.dof != wire.N_JOINTS:
            raise ValueError(f"robot model must have {wire.N_JOINTS} DOF, got {model.dof}")
        self.model = model
        self.deterministic = deterministic
        self.q = model.clip(model.neutral.copy())
        self.dq = np.zeros(model.dof)
        self.bridge = Bridge(self.q, limits,
                             position_lo=model.limits_lo, position_hi=model.limits_hi)
        self.now_us = 0
        self.subscribers: dict[int, Subscriber] = {}
        self.commander_id: int | None = None
        self.stats = CoreStats()
        self.command_log: list[wire.Command] = []

    # -- subscriptions ------------------------------------------------------

    def add_client(self, conn_id: int, hello: wire.Hello, send) -> bool:
        """Register a client; False (after an error reply) if rejected."""
        if hello.role == wire.ROLE_COMMANDER and self.commander_id is not None:
            send(wire.Error(wire.ERR_COMMANDER_OCCUPIED, "commander slot occupied"))
            return False
        rate = hello.state_rate_hz or DEFAULT_STATE_RATE
        rate = max(1, min(int(rate), MAX_STATE_RATE))
        sub = Subscriber(conn_id, hello.role, rate,
                         self.now_us + 1_000_000 // rate, send)
        self.subscribers[conn_id] = sub
        if hello.role == wire.ROLE_COMMANDER:
            self.commander_id = conn_id
        send(wire.Hello(hello.role, rate))
        send(self._state_msg())
        return True

    def drop_client(self, conn_id: int):
        self.subscribers.pop(conn_id, None)
        if self.commander_id == conn_id:
            self.commander_id = None

    # -- message handling ---------------------------------------------------

    def handle(self, conn_id: int, msg):
        if isinstance(msg, wire.Command):
            self._handle_command(conn_id, msg)
        elif isinstance(msg, wire.Heartbeat):
            pass  # liveness only
        elif isinstance(msg, wire.Hello):
            sub = self.subscribers.get(conn_id)
            if sub is not None:
                sub.rate_hz = max(1, min(msg.state_rate_hz or DEFAULT_STATE_RATE,
                                         MAX_STATE_RATE))

    def _handle_command(self, conn_id: int, cmd: wire.Command):
        if conn_id != self.commander_id:
            sub = self.subscribers.get(conn_id)
            if sub is not None:
                sub.send(wire.Error(wire.ERR_COMMANDER_OCCUPIED,
                                    "not the commander"))
            return
        if self.deterministic and cmd.timestamp_us > self.now_us:
            self.advance_to(cmd.timestamp_us)
        sub = self.subscribers.get(conn_id)
        reply = self._state_msg() if (self.deterministic and sub is not None) else None
        t_apply = cmd.timestamp_us if self.deterministic else self.now_us
        self.bridge.command(max(t_apply, 0), cmd.target_array())
        self.command_log.append(cmd)
        self.stats.commands += 1
        if reply is not None:
            # pre-command plant state at the command time; sent last so a
            # reply in hand implies the command is fully applied and logged
            sub.send(reply)

    # -- time ----------------------------------------------------------------

    def advance_to(self, t_us: int):
        """Run whole 1 ms plant ticks up to and including t_us."""
        while self.now_us + Bridge.TICK_US <= t_us:
            self._tick()

    def _tick(self):
        t_us, q_traj, v, a = self.bridge.tick()
        self.now_us = t_us
        self.q = np.clip(self.q + v * 1e-3, self.model.limits_lo, self.model.limits_hi)
        self.dq = v
        if self.bridge.telemetry.timed_out:
            self.stats.timeouts = self.bridge.telemetry.timeouts
        for sub in list(self.subscribers.values()):
            if self.deterministic and sub.conn_id == self.commander_id:
                continue  # the commander gets exactly one lockstep reply per command
            if self.now_us >= sub.next_due_us:
                sub.send(self._state_msg())
                period = 1_000_000 // sub.rate_hz
                sub.next_due_us += period * ((self.now_us - sub.next_due_us) // period + 1)

    def _state_msg(self) -> wire.State:
        self.stats.states_sent += 1
        return wire.State(self.now_us, tuple(float(v) for v in self.q),
                          tuple(float(v) for v in self.dq))

    def link_poses(self):
        """Named frame -> Pose for every declared frame (for the console)."""
        out = {}
        cache = self.model.fk_full(self.q)
        T = cache[0]
        for name, ji in self.model.frames.items():
            if name.startswith("joint:"):
                continue
            out[name] = T[ji]
        return out


class Server:
    """TCP front end around a ServerCore."""

    def __init__(self, model: KinematicModel, limits=DEFAULT_LIMITS,
                 port: int = DEFAULT_PORT, mode: str = "realtime"):
        if mode not in ("realtime", "deterministic"):
            raise ValueError(f"unknown mode {mode!r}")
        self.core = ServerCore(model, limits, deterministic=(mode == "deterministic"))
        self.mode = mode
        self.lock = threading.Lock()
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind(("127.0.0.1", port))
        self._listener.listen(8)
        self.port = self._listener.getsockname()[1]
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._next_conn_id = 0
        self._conn_locks: dict[int, threading.Lock] = {}

    # -- lifecycle -----------------------------------------------------------

    def start(self):
        t = threading.Thread(target=self._accept_loop, daemon=True, name="accept")
        t.start()
        self._threads.append(t)
        if self.mode == "realtime":
            t = threading.Thread(target=self._control_loop, daemon=True, name="control")
            t.start()
            self._threads.append(t)
        return self

    def stop(self):
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    # -- loops ----------------------------------------------------------------

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn_id = self._next_conn_id
            self._next_conn_id += 1
            self._conn_locks[conn_id] = threading.Lock()
            t = threading.Thread(target=self._reader, args=(conn_id, sock),
                                 daemon=True, name=f"reader-{conn_id}")
            t.start()
            self._threads.append(t)

    def _sender_for(self, conn_id: int, sock: socket.socket):
        wlock = self._conn_locks[conn_id]

        def send(msg):
            data = wire.encode(msg)
            try:
                with wlock:
                    sock.sendall(data)
            except OSError:
                self._drop(conn_id, sock)
        return send

    def _drop(self, conn_id: int, sock: socket.socket):
        with self.lock:
            self.core.drop_client(conn_id)
        try:
            sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            sock.close()
        except OSError:
            pass

    def _reader(self, conn_id: int, sock: socket.socket):
        send = self._sender_for(conn_id, sock)
        decoder = wire.FrameDecoder()
        registered = False
        try:
            while not self._stop.is_set():
                try:
                    chunk = sock.recv(65536)
                except OSError:
                    break
                if not chunk:
                    break
                try:
                    msgs = decoder.feed(chunk)
                except wire.WireError as exc:
                    with self.lock:
                        self.core.stats.malformed += 1
                    send(wire.Error(wire.ERR_MALFORMED, str(exc)))
                    break
                for msg in msgs:
                    if not registered:
                        if not isinstance(msg, wire.Hello):
                            send(wire.Error(wire.ERR_MALFORMED, "expected HELLO first"))
                            return self._drop(conn_id, sock)
                        with self.lock:
                            ok = self.core.add_client(conn_id, msg, send)
                        if not ok:
                            return self._drop(conn_id, sock)
                        registered = True
                        continue
                    with self.lock:
                        self.core.handle(conn_id, msg)
        finally:
            self._drop(conn_id, sock)

    def _control_loop(self):
        start = time.monotonic()
        while not self._stop.is_set():
            wall_us = int((time.monotonic() - start) * 1e6)
            with self.lock:
                self.core.advance_to(wall_us)
            time.sleep(0.001)


def serve(model: KinematicModel, limits=DEFAULT_LIMITS, port: int = DEFAULT_PORT,
          mode: str = "realtime") -> Server:
    """Start a robot I/O server; returns the running Server."""
    return Server(model, limits, port=port, mode=mode).start()
