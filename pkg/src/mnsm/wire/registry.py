"""The name service: services register by name, clients look them up.

The registry keeps exactly one record per name; a re-registration replaces
the old record and increments its generation counter.  Clients use one
short-lived TCP connection per request, which keeps them trivially robust
against registry restarts: they just retry.  A BYE from a service removes
its record.
"""

from __future__ import annotations

import argparse
import logging
import os
import socket
import socketserver
import threading
import time
from dataclasses import dataclass

from mnsm.wire.messages import (
    SERVICE_KINDS,
    WireError,
    WireMessage,
    decode_message,
    encode_message,
)

log = logging.getLogger(__name__)

DEFAULT_PORT = 7900
ENV_OVERRIDE = "MNSM_REGISTRY"


class RegistryUnreachable(ConnectionError):
    pass


@dataclass
class ServiceRecord:
    name: str
    kind: str
    address: str  # "host:port"
    registered_at: float = 0.0
    generation: int = 0

    def to_fields(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "address": self.address,
            "registered_at": self.registered_at,
            "generation": self.generation,
        }

    @staticmethod
    def from_fields(fields: dict) -> "ServiceRecord":
        return ServiceRecord(
            name=fields["name"],
            kind=fields["kind"],
            address=fields["address"],
            registered_at=fields.get("registered_at", 0.0),
            generation=fields.get("generation", 0),
        )

    def host_port(self) -> tuple[str, int]:
        host, _, port = self.address.rpartition(":")
        return host, int(port)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        registry: RegistryServer = self.server.registry  # type: ignore[attr-defined]
        while True:
            line = self.rfile.readline()
            if not line:
                return
            try:
                msg = decode_message(line)
            except WireError as exc:
                log.warning("registry: dropping bad frame: %s", exc)
                continue
            reply = registry.handle(msg)
            if reply is not None:
                self.wfile.write(encode_message(reply))
                self.wfile.flush()


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class RegistryServer:
    """In-process registry; serve() on a background thread or via main()."""

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
        self._server = _Server((host, port), _Handler)
        self._server.registry = self  # type: ignore[attr-defined]
        self._table: dict[str, ServiceRecord] = {}
        self._generations: dict[str, int] = {}
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> "RegistryServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        log.info("registry listening on %s", self.address)
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def handle(self, msg: WireMessage) -> WireMessage | None:
        if msg.type == "REGISTER":
            return self._register(msg)
        if msg.type == "LOOKUP":
            return self._lookup(msg)
        if msg.type == "LIST":
            return self._list(msg)
        if msg.type == "BYE":
            with self._lock:
                self._table.pop(msg.sender, None)
            return None
        log.warning("registry: unhandled %s from %s", msg.type, msg.sender)
        return None

    def _register(self, msg: WireMessage) -> WireMessage:
        name = msg["name"]
        kind = msg["kind"]
        if not name or kind not in SERVICE_KINDS:
            return WireMessage("LOOKUP_REPLY", "registry", 0, {"found": False, "error": "malformed-name"})
        with self._lock:
            gen = self._generations.get(name, 0) + 1
            self._generations[name] = gen
            record = ServiceRecord(name, kind, msg["address"], time.time(), gen)
            self._table[name] = record
        return WireMessage("LOOKUP_REPLY", "registry", 0, {"found": True, **record.to_fields()})

    def _lookup(self, msg: WireMessage) -> WireMessage:
        with self._lock:
            record = self._table.get(msg["name"])
        if record is None:
            return WireMessage("LOOKUP_REPLY", "registry", 0, {"found": False})
        return WireMessage("LOOKUP_REPLY", "registry", 0, {"found": True, **record.to_fields()})

    def _list(self, msg: WireMessage) -> WireMessage:
        kind = msg.get("kind")
        with self._lock:
            records = [
                r.to_fields()
                for r in sorted(self._table.values(), key=lambda r: r.name)
                if kind is None or r.kind == kind
            ]
        return WireMessage("LIST_REPLY", "registry", 0, {"records": records})


class RegistryClient:
    """One short-lived connection per request; retries are the caller's loop."""

    def __init__(self, address: str, timeout: float = 3.0, identity: str = ""):
        self.address = address
        self.timeout = timeout
        self.identity = identity

    def _request(self, msg: WireMessage, expect_reply: bool = True) -> WireMessage | None:
        host, _, port = self.address.rpartition(":")
        try:
            with socket.create_connection((host, int(port)), timeout=self.timeout) as sock:
                sock.sendall(encode_message(msg))
                if not expect_reply:
                    return None
                buf = b""
                while b"\n" not in buf:
                    chunk = sock.recv(4096)
                    if not chunk:
                        raise RegistryUnreachable("registry closed the connection")
                    buf += chunk
                return decode_message(buf.split(b"\n", 1)[0])
        except (OSError, WireError) as exc:
            raise RegistryUnreachable(f"registry at {self.address}: {exc}") from None

    def register(self, name: str, kind: str, address: str) -> int:
        if not name:
            raise ValueError("malformed-name: empty service name")
        reply = self._request(
            WireMessage("REGISTER", self.identity or name, 0,
                        {"name": name, "kind": kind, "address": address})
        )
        if not reply.get("found"):
            raise ValueError(reply.get("error", "registration refused"))
        return reply["generation"]

    def register_with_retry(
        self, name: str, kind: str, address: str, give_up_after: float = 60.0
    ) -> int:
        deadline = time.monotonic() + give_up_after
        delay = 0.2
        while True:
            try:
                return self.register(name, kind, address)
            except RegistryUnreachable:
                if time.monotonic() >= deadline:
                    raise
                time.sleep(delay)
                delay = min(delay * 2, 2.0)

    def lookup(self, name: str) -> ServiceRecord | None:
        reply = self._request(WireMessage("LOOKUP", self.identity, 0, {"name": name}))
        if not reply.get("found"):
            return None
        return ServiceRecord.from_fields(reply.fields)

    def list(self, kind: str | None = None) -> list[ServiceRecord]:
        fields = {} if kind is None else {"kind": kind}
        reply = self._request(WireMessage("LIST", self.identity, 0, fields))
        return [ServiceRecord.from_fields(f) for f in reply["records"]]

    def bye(self, name: str) -> None:
        try:
            self._request(WireMessage("BYE", name, 0, {}), expect_reply=False)
        except RegistryUnreachable:
            pass  # going away anyway


def registry_address(flag_value: str | None = None) -> str:
    """Resolve the registry address: env override beats flag beats default."""
    env = os.environ.get(ENV_OVERRIDE)
    if env:
        return env if ":" in env else f"{env}:{DEFAULT_PORT}"
    if flag_value:
        return flag_value if ":" in flag_value else f"{flag_value}:{DEFAULT_PORT}"
    return f"127.0.0.1:{DEFAULT_PORT}"


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="mnsm-registry", description="name service registry")
    ap.add_argument("--registry-port", type=int, default=DEFAULT_PORT)
    ap.add_argument("--host", default="0.0.0.0")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    server = RegistryServer(args.host, args.registry_port).start()
    print(f"registry listening on {server.address}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
