"""Typed client for the robot I/O wire protocol."""

from __future__ import annotations

import queue
import socket
import threading
import time

import numpy as np

from . import wire


class ConnectRefusedError(ConnectionError):
    pass


class HandshakeTimeoutError(TimeoutError):
    pass


class PeerError(RuntimeError):
    def __init__(self, code: int, text: str):
        self.code = code
        self.text = text
        super().__init__(f"peer error {code}: {text}")


class RobotClient:
    """Blocking commander/observer client with a background reader.

    States arrive on an internal queue; `next_state` pops in order. A
    heartbeat ticks once per second while connected.
    """

    HANDSHAKE_TIMEOUT_S = 2.0

    def __init__(self, sock: socket.socket, role: int):
        self.sock = sock
        self.role = role
        self.states: queue.Queue = queue.Queue(maxsize=4096)
        self._hello_ack: queue.Queue = queue.Queue(maxsize=1)
        self._error: PeerError | None = None
        self._closed = threading.Event()
        self._wlock = threading.Lock()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._heart = threading.Thread(target=self._heartbeat_loop, daemon=True)
        self._heart.start()

    # -- connection -----------------------------------------------------------

    @staticmethod
    def connect(addr, role: int = wire.ROLE_COMMANDER,
                state_rate_hz: int = 30, timeout: float = 5.0) -> "RobotClient":
        host, port = addr
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except ConnectionRefusedError as exc:
            raise ConnectRefusedError(f"cannot reach {host}:{port}") from exc
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(None)
        client = RobotClient(sock, role)
        client._send(wire.Hello(role, state_rate_hz))
        try:
            ack = client._hello_ack.get(timeout=RobotClient.HANDSHAKE_TIMEOUT_S)
        except queue.Empty:
            client.close()
            if client._error is not None:
                raise client._error
            raise HandshakeTimeoutError("no HELLO acknowledgment within 2 s") from None
        if isinstance(ack, PeerError):
            client.close()
            raise ack
        return client

    def close(self):
        self._closed.set()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- I/O --------------------------------------------------------------------

    def _send(self, msg):
        with self._wlock:
            self.sock.sendall(wire.encode(msg))

    def send_command(self, timestamp_us: int, targets):
        targets = np.asarray(targets, dtype=float)
        self._send(wire.Command(int(timestamp_us), tuple(float(v) for v in targets)))

    def send_tracking_heartbeat(self, timestamp_us: int):
        self._send(wire.Heartbeat(int(timestamp_us)))

    def next_state(self, timeout: float = 5.0) -> wire.State:
        try:
            item = self.states.get(timeout=timeout)
        except queue.Empty:
            if self._error is not None:
                raise self._error
            raise TimeoutError("no state message received") from None
        if isinstance(item, PeerError):
            raise item
        return item

    def drain_states(self) -> list[wire.State]:
        out = []
        while True:
            try:
                item = self.states.get_nowait()
            except queue.Empty:
                return out
            if not isinstance(item, PeerError):
                out.append(item)

    # -- background -------------------------------------------------------------

    def _read_loop(self):
        decoder = wire.FrameDecoder()
        hello_seen = False
        while not self._closed.is_set():
            try:
                chunk = self.sock.recv(65536)
            except OSError:
                break
            if not chunk:
                break
            try:
                msgs = decoder.feed(chunk)
            except wire.WireError as exc:
                self._error = PeerError(wire.ERR_MALFORMED, str(exc))
                break
            for msg in msgs:
                if isinstance(msg, wire.Hello) and not hello_seen:
                    hello_seen = True
                    self._hello_ack.put(msg)
                elif isinstance(msg, wire.State):
                    try:
                        self.states.put_nowait(msg)
                    except queue.Full:
                        try:
                            self.states.get_nowait()  # drop oldest
                        except queue.Empty:
                            pass
                        self.states.put_nowait(msg)
                elif isinstance(msg, wire.Error):
                    err = PeerError(msg.code, msg.text)
                    self._error = err
                    if not hello_seen:
                        self._hello_ack.put(err)
                    else:
                        self.states.put(err)
        self._closed.set()

    def _heartbeat_loop(self):
        while not self._closed.wait(1.0):
            try:
                self._send(wire.Heartbeat(int(time.time() * 1e6)))
            except OSError:
                return
