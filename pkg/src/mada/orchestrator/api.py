"""HTTP control surface over a running workflow.

Read endpoints serve snapshots of the same records the trace holds; the
command endpoint feeds the expert queue; /events streams every trace event
in write order, replaying history before going live, so any number of
watchers can follow one study without disturbing it.
"""

from __future__ import annotations

import json
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .errors import InvalidBounds, NoActiveStudy, NoPendingApproval
from .workflow import Orchestrator

KEEPALIVE_S = 0.5


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def orchestrator(self) -> Orchestrator:
        return self.server.orchestrator  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # tests need a quiet console
        pass

    # ------------------------------------------------------------------

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error_for(self, exc: Exception) -> None:
        status = 400
        if isinstance(exc, NoActiveStudy):
            status = 404
        elif isinstance(exc, NoPendingApproval):
            status = 409
        self._send_json(status, {"error": type(exc).__name__, "message": str(exc)})

    # ------------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        params = parse_qs(url.query)
        try:
            if url.path == "/study":
                self._send_json(200, self.orchestrator.study_snapshot())
            elif url.path == "/rounds":
                self._send_json(200, {"rounds": self.orchestrator.rounds_snapshot()})
            elif url.path == "/trace":
                offset = int(params.get("offset", ["0"])[0])
                limit = int(params.get("limit", ["100"])[0])
                self._send_json(200, self.orchestrator.trace_page(offset, limit))
            elif url.path == "/field":
                raw = params.get("design", [""])[0]
                design = [float(v) for v in raw.split(",") if v != ""]
                if not design:
                    raise ValueError("design query parameter is required, e.g. "
                                     "?design=0.1,-0.2,0.1,-0.2")
                self._send_json(200, self.orchestrator.field_export(design))
            elif url.path == "/events":
                self._stream_events()
            else:
                self._send_json(404, {"error": "NotFound", "message": url.path})
        except (NoActiveStudy, NoPendingApproval, InvalidBounds, ValueError) as exc:
            self._send_error_for(exc)

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/command":
            self._send_json(404, {"error": "NotFound", "message": url.path})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            command = json.loads(self.rfile.read(length) or b"{}")
            if not isinstance(command, dict):
                raise ValueError("command body must be a JSON object")
            ack = self.orchestrator.expert_command(command)
            self._send_json(200, ack)
        except (NoActiveStudy, NoPendingApproval, InvalidBounds, ValueError) as exc:
            self._send_error_for(exc)

    # ------------------------------------------------------------------

    def _stream_events(self) -> None:
        past, live = self.orchestrator.subscribe()
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            seq = 0
            for event in past:
                self._write_event(seq, event)
                seq += 1
            while not self.server.stopping:  # type: ignore[attr-defined]
                try:
                    event = live.get(timeout=KEEPALIVE_S)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                self._write_event(seq, event)
                seq += 1
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            self.orchestrator.unsubscribe(live)

    def _write_event(self, seq: int, event: dict) -> None:
        data = json.dumps(event, sort_keys=True)
        self.wfile.write(f"id: {seq}\ndata: {data}\n\n".encode())
        self.wfile.flush()


class ControlServer:
    """Threaded HTTP server bound to one orchestrator."""

    def __init__(self, orchestrator: Orchestrator, host: str = "127.0.0.1",
                 port: int = 0):
        self.orchestrator = orchestrator
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.orchestrator = orchestrator  # type: ignore[attr-defined]
        self._httpd.stopping = False  # type: ignore[attr-defined]
        self._thread: Optional[threading.Thread] = None
        orchestrator.interactive = True

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "ControlServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        daemon=True, name="control-api")
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.stopping = True  # type: ignore[attr-defined]
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def __enter__(self) -> "ControlServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


def serve_control_api(orchestrator: Orchestrator, host: str = "127.0.0.1",
                      port: int = 0) -> ControlServer:
    """Start serving a workflow; returns the running server (port resolved)."""
    return ControlServer(orchestrator, host, port).start()
