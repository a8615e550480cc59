"""Bidirectional ordered message sessions with heartbeat liveness.

A session wraps a TCP socket: one reader thread delivers inbound messages
to the owner in arrival order, a keeper thread sends HEARTBEAT whenever we
have been quiet for one liveness interval and declares the session dead
after three intervals without any inbound traffic (a hung host never
closes its socket, so transport close alone is not enough).  The owner
gets exactly one close notification per session, whatever the cause.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from dataclasses import dataclass

from mnsm.wire.messages import WireError, WireMessage, decode_message, encode_message

log = logging.getLogger(__name__)

DEAD_AFTER_INTERVALS = 3


@dataclass
class LivenessTracker:
    """Pure heartbeat/death bookkeeping, testable under a virtual clock."""

    interval: float
    last_rx: float
    last_tx: float

    def on_rx(self, now: float) -> None:
        self.last_rx = now

    def on_tx(self, now: float) -> None:
        self.last_tx = now

    def heartbeat_due(self, now: float) -> bool:
        return now - self.last_tx >= self.interval

    def dead(self, now: float) -> bool:
        return now - self.last_rx >= DEAD_AFTER_INTERVALS * self.interval


class Session:
    """One peer connection.  Callbacks run on the session's reader thread."""

    def __init__(
        self,
        sock: socket.socket,
        identity: str,
        on_message,
        on_close,
        liveness_interval: float = 2.0,
        clock=time.monotonic,
    ):
        self._sock = sock
        self.identity = identity
        self.peer = None  # sender name seen on the first inbound message
        self._on_message = on_message
        self._on_close = on_close
        self._clock = clock
        now = clock()
        self._tracker = LivenessTracker(liveness_interval, now, now)
        self._send_lock = threading.Lock()
        self._seq = 0
        self._closed = threading.Event()
        self._close_reason = ""
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._keeper = threading.Thread(target=self._keep_loop, daemon=True)

    @classmethod
    def connect(
        cls,
        host: str,
        port: int,
        identity: str,
        on_message,
        on_close,
        liveness_interval: float = 2.0,
        timeout: float = 5.0,
    ) -> "Session":
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.settimeout(None)
        return cls(sock, identity, on_message, on_close, liveness_interval).start()

    def start(self) -> "Session":
        self._reader.start()
        self._keeper.start()
        return self

    @property
    def closed(self) -> bool:
        return self._closed.is_set()

    def send(self, msg: WireMessage) -> bool:
        """Send with this session's next sequence number; False if closed."""
        if self._closed.is_set():
            return False
        with self._send_lock:
            msg.sender = msg.sender or self.identity
            msg.seq = self._seq
            self._seq += 1
            try:
                self._sock.sendall(encode_message(msg))
            except OSError as exc:
                self.close(f"send failed: {exc}")
                return False
            self._tracker.on_tx(self._clock())
        return True

    def close(self, reason: str = "closed") -> None:
        if self._closed.is_set():
            return
        self._close_reason = reason
        self._closed.set()
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass
        try:
            self._on_close(self, reason)
        except Exception:
            log.exception("session close callback failed")

    def _read_loop(self) -> None:
        buf = b""
        while not self._closed.is_set():
            try:
                chunk = self._sock.recv(65536)
            except OSError:
                break
            if not chunk:
                break
            self._tracker.on_rx(self._clock())
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                if not line.strip():
                    continue
                try:
                    msg = decode_message(line)
                except WireError as exc:
                    log.warning("session %s: dropping bad frame: %s", self.identity, exc)
                    continue
                if self.peer is None:
                    self.peer = msg.sender
                if msg.type == "HEARTBEAT":
                    continue
                if msg.type == "BYE":
                    self.close("peer said BYE")
                    return
                try:
                    self._on_message(self, msg)
                except Exception:
                    log.exception("session %s: message callback failed", self.identity)
        self.close("connection lost")

    def _keep_loop(self) -> None:
        poll = max(self._tracker.interval / 4.0, 0.05)
        while not self._closed.wait(poll):
            now = self._clock()
            if self._tracker.dead(now):
                self.close("liveness timeout")
                return
            if self._tracker.heartbeat_due(now):
                self.send(WireMessage("HEARTBEAT", self.identity))


class SessionListener:
    """Accept inbound connections and wrap each in a Session."""

    def __init__(
        self,
        identity: str,
        on_message,
        on_close,
        host: str = "127.0.0.1",
        port: int = 0,
        liveness_interval: float = 2.0,
    ):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(64)
        self.identity = identity
        self._on_message = on_message
        self._on_close = on_close
        self._interval = liveness_interval
        self._stopped = threading.Event()
        self.sessions: list[Session] = []
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)

    @property
    def port(self) -> int:
        return self._sock.getsockname()[1]

    @property
    def address(self) -> str:
        host, port = self._sock.getsockname()[:2]
        return f"{host}:{port}"

    def start(self) -> "SessionListener":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stopped.set()
        try:
            self._sock.close()
        except OSError:
            pass
        for session in list(self.sessions):
            session.close("listener stopped")

    def _accept_loop(self) -> None:
        while not self._stopped.is_set():
            try:
                sock, _ = self._sock.accept()
            except OSError:
                return
            session = Session(
                sock,
                self.identity,
                self._on_message,
                self._on_close,
                liveness_interval=self._interval,
            ).start()
            self.sessions.append(session)
