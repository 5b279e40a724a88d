"""Streamable-HTTP style transport: one envelope per POST, sessions via a header."""

from __future__ import annotations

import json
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Dict, Optional, Tuple

from .envelopes import ErrorCode, encode_line, error_response, recover_request_id
from .server import McpServer, Session

SESSION_HEADER = "mcp-session-id"
RPC_PATH = "/"


class _SessionTable:
    def __init__(self) -> None:
        self._sessions: Dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, server: McpServer) -> Tuple[str, Session]:
        key = uuid.uuid4().hex
        session = server.open_session("http")
        with self._lock:
            self._sessions[key] = session
        return key, session

    def get(self, key: str) -> Optional[Session]:
        with self._lock:
            return self._sessions.get(key)


def _make_handler(server: McpServer, table: _SessionTable):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # keep test output quiet
            pass

        def _reply(self, status: int, body: bytes, session_key: Optional[str] = None) -> None:
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            if session_key is not None:
                self.send_header(SESSION_HEADER, session_key)
            self.end_headers()
            if body:
                self.wfile.write(body)

        def do_POST(self) -> None:
            if self.path != RPC_PATH:
                self._reply(404, b'{"error":"no such endpoint"}')
                return
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length).decode("utf-8", errors="replace")
            try:
                envelope = json.loads(raw)
            except ValueError as exc:
                req_id = recover_request_id(raw)
                body = encode_line(error_response(req_id, ErrorCode.PARSE_ERROR,
                                                  f"parse error: {exc}")).encode()
                self._reply(200, body)
                return

            session_key = self.headers.get(SESSION_HEADER)
            if session_key is None:
                session_key, session = table.create(server)
            else:
                session = table.get(session_key)
                if session is None:
                    body = encode_line(error_response(
                        envelope.get("id") if isinstance(envelope, dict) else None,
                        ErrorCode.NOT_INITIALIZED, "unknown session id")).encode()
                    self._reply(200, body)
                    return

            response = server.handle_envelope(session, envelope)
            if response is None:
                # notification: empty-body acknowledgment
                self._reply(204, b"", session_key)
                return
            self._reply(200, encode_line(response).encode(), session_key)

    return Handler


def serve_http(server: McpServer, host: str = "127.0.0.1", port: int = 0):
    """Bind a threading HTTP server; returns (httpd, thread). httpd.server_address has the port."""
    table = _SessionTable()
    httpd = ThreadingHTTPServer((host, port), _make_handler(server, table))
    httpd.daemon_threads = True
    thread = threading.Thread(target=httpd.serve_forever, name=f"mcp-http-{server.name}", daemon=True)
    thread.start()
    return httpd, thread
