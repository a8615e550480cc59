"""Operator HTTP API: snapshots, config, node actions, and the event stream.

Serves the console bundle at / when a static directory is configured.  The
/events endpoint is a server-sent-event stream whose records use exactly
the snapshot element schema; each new consumer receives a full snapshot
before any incremental update.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from mnsm.aggregator import ControllerCommand
from mnsm.manager import ManagerService

log = logging.getLogger(__name__)

STREAM_KEEPALIVE = 15.0


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def service(self) -> ManagerService:
        return self.server.service  # type: ignore[attr-defined]

    @property
    def static_dir(self) -> str | None:
        return self.server.static_dir  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)

    # -- helpers -------------------------------------------------------------

    def _json(self, status: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _text(self, status: int, body: str, content_type="text/plain; charset=utf-8") -> None:
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _body_json(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            return json.loads(raw)
        except json.JSONDecodeError:
            return None

    # -- routes --------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if url.path == "/events":
            return self._stream_events()
        if url.path == "/nodes":
            return self._json(200, self.service.snapshot())
        if url.path == "/aggregate":
            return self._json(200, self.service.aggregate_view())
        if url.path == "/config":
            return self._json(200, self.service.config_view())
        if len(parts) == 3 and parts[0] == "nodes" and parts[2] == "log":
            return self._node_log(parts[1], url)
        return self._static(url.path)

    def do_POST(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if url.path == "/command":
            body = self._body_json()
            if not body or not body.get("name"):
                return self._json(400, {"ok": False, "error": "missing command name"})
            self.service.submit(ControllerCommand(body["name"]))
            return self._json(200, {"ok": True})
        if len(parts) == 3 and parts[0] == "nodes" and parts[2] in (
            "kill", "restart", "clear-unavailable",
        ):
            ok, reason = self.service.node_action(parts[1], parts[2].replace("-", "_"))
            if ok:
                return self._json(200, {"ok": True})
            status = 404 if reason == "unknown-node" else 409
            return self._json(status, {"ok": False, "error": reason})
        return self._json(404, {"ok": False, "error": "no such endpoint"})

    def do_PUT(self):
        if urlparse(self.path).path != "/config":
            return self._json(404, {"ok": False, "error": "no such endpoint"})
        body = self._body_json()
        if body is None:
            return self._json(400, {"accepted": False, "errors": {"body": "not JSON"}})
        accepted, errors = self.service.apply_config_change(body)
        if accepted:
            return self._json(200, {"accepted": True, "config": self.service.config_view()})
        return self._json(400, {"accepted": False, "errors": errors})

    # -- endpoint bodies --------------------------------------------------------

    def _node_log(self, node: str, url) -> None:
        lines = int(parse_qs(url.query).get("lines", ["200"])[0])
        try:
            tail = self.service.view_log(node, lines)
        except ConnectionError as exc:
            return self._json(409, {"ok": False, "error": str(exc)})
        except TimeoutError as exc:
            return self._json(504, {"ok": False, "error": str(exc)})
        body = "\n".join(tail) + ("\n" if tail else "")
        return self._text(200, body)

    def _stream_events(self) -> None:
        sub_id, q = self.service.subscribe()
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        try:
            while True:
                try:
                    rec = q.get(timeout=STREAM_KEEPALIVE)
                    payload = f"data: {json.dumps(rec)}\n\n"
                except queue.Empty:
                    payload = ": keepalive\n\n"
                self.wfile.write(payload.encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.service.unsubscribe(sub_id)

    def _static(self, path: str) -> None:
        if self.static_dir is None:
            if path == "/":
                return self._text(
                    200,
                    "mnsm manager operator API\n"
                    "endpoints: /nodes /aggregate /config /events /command "
                    "/nodes/{name}/kill|restart|log\n",
                )
            return self._json(404, {"ok": False, "error": "no such endpoint"})
        rel = "index.html" if path == "/" else path.lstrip("/")
        full = os.path.realpath(os.path.join(self.static_dir, rel))
        if not full.startswith(os.path.realpath(self.static_dir)) or not os.path.isfile(full):
            return self._json(404, {"ok": False, "error": "not found"})
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as f:
            data = f.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class OperatorServer:
    def __init__(self, service: ManagerService, port: int = 8900, host: str = "127.0.0.1",
                 static_dir: str | None = None):
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.service = service  # type: ignore[attr-defined]
        self._httpd.static_dir = static_dir  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def start(self) -> "OperatorServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
