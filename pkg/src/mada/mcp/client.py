"""Client role: request bookkeeping over in-process, subprocess-stdio, or http transports."""

from __future__ import annotations

import itertools
import json
import subprocess
import threading
import urllib.error
import urllib.request
from typing import Any, List, Optional

from .envelopes import (
    PROTOCOL_VERSION,
    RpcError,
    decode_line,
    encode_line,
    make_notification,
    make_request,
)
from .server import McpServer


class TransportError(Exception):
    """Connection-level failure: refused, wrong path, broken pipe, malformed body."""


class DirectTransport:
    """In-process transport; each instance is its own session on the server."""

    def __init__(self, server: McpServer):
        self._server = server
        self._session = server.open_session("direct")

    def send(self, envelope: dict) -> Optional[dict]:
        return self._server.handle_envelope(self._session, envelope)

    def close(self) -> None:
        pass


class StdioProcessTransport:
    """Runs the server as a child process speaking newline-framed envelopes."""

    def __init__(self, argv: List[str], cwd: Optional[str] = None, env: Optional[dict] = None):
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                cwd=cwd,
                env=env,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise TransportError(f"failed to start {argv[0]!r}: {exc}") from exc
        self._lock = threading.Lock()

    def send(self, envelope: dict) -> Optional[dict]:
        expects_reply = "id" in envelope
        with self._lock:
            try:
                self._proc.stdin.write(encode_line(envelope) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError) as exc:
                raise TransportError(f"server process pipe closed: {exc}") from exc
            if not expects_reply:
                return None
            line = self._proc.stdout.readline()
        if not line:
            raise TransportError("server process closed its output")
        return decode_line(line.rstrip("\r\n"))

    def close(self) -> None:
        try:
            self._proc.stdin.close()
        except Exception:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()


class HttpTransport:
    """One envelope per POST; session continuity via the server-issued header."""

    def __init__(self, url: str, timeout: float = 10.0):
        self._url = url
        self._timeout = timeout
        self._session_key: Optional[str] = None

    def send(self, envelope: dict) -> Optional[dict]:
        body = encode_line(envelope).encode()
        request = urllib.request.Request(self._url, data=body, method="POST",
                                         headers={"Content-Type": "application/json"})
        if self._session_key is not None:
            request.add_header("mcp-session-id", self._session_key)
        try:
            with urllib.request.urlopen(request, timeout=self._timeout) as reply:
                key = reply.headers.get("mcp-session-id")
                if key:
                    self._session_key = key
                payload = reply.read()
                if reply.status == 204 or not payload:
                    return None
                return json.loads(payload.decode())
        except urllib.error.HTTPError as exc:
            raise TransportError(f"http {exc.code} from {self._url}") from exc
        except urllib.error.URLError as exc:
            raise TransportError(f"cannot reach {self._url}: {exc.reason}") from exc
        except ValueError as exc:
            raise TransportError(f"malformed response body: {exc}") from exc

    def close(self) -> None:
        pass


class McpClient:
    """Issues initialize/tools requests and enforces response-id discipline."""

    def __init__(self, transport, client_name: str = "mada-client"):
        self._transport = transport
        self._client_name = client_name
        self._ids = itertools.count(1)
        self.server_capabilities: Optional[dict] = None

    def request(self, method: str, params: Optional[dict] = None) -> Any:
        req_id = next(self._ids)
        response = self._transport.send(make_request(req_id, method, params))
        if response is None:
            raise TransportError(f"no response to request {req_id}")
        if response.get("id") != req_id:
            raise TransportError(f"response id {response.get('id')!r} does not match request {req_id}")
        if "error" in response:
            err = response["error"]
            raise RpcError(err.get("code", 0), err.get("message", ""), err.get("data"))
        return response.get("result")

    def notify(self, method: str, params: Optional[dict] = None) -> None:
        self._transport.send(make_notification(method, params))

    def initialize(self) -> dict:
        result = self.request("initialize", {
            "protocol_version": PROTOCOL_VERSION,
            "client_info": {"name": self._client_name},
        })
        self.server_capabilities = result
        return result

    def list_tools(self) -> List[dict]:
        return self.request("tools/list")["tools"]

    def call_tool(self, name: str, arguments: Optional[dict] = None) -> Any:
        return self.request("tools/call", {"name": name, "arguments": arguments or {}})

    def close(self) -> None:
        try:
            self.notify("close")
        except TransportError:
            pass
        self._transport.close()
