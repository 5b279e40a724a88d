"""Newline-delimited stdio serving loop for a tool server."""

from __future__ import annotations

import json
import logging
import sys
from typing import IO, Optional

from .envelopes import ErrorCode, encode_line, error_response, recover_request_id
from .server import McpServer

log = logging.getLogger("mada.mcp")


def serve_stdio(server: McpServer, in_stream: Optional[IO[str]] = None,
                out_stream: Optional[IO[str]] = None) -> None:
    """Serve one session over line-framed text streams until EOF.

    Unparseable lines produce a −32700 response when a request id can be
    recovered from the raw text, and are logged and skipped otherwise.
    """
    in_stream = in_stream if in_stream is not None else sys.stdin
    out_stream = out_stream if out_stream is not None else sys.stdout
    session = server.open_session("stdio")

    def emit(envelope: dict) -> None:
        out_stream.write(encode_line(envelope) + "\n")
        out_stream.flush()

    for raw in in_stream:
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        try:
            envelope = json.loads(line)
        except ValueError as exc:
            req_id = recover_request_id(line)
            if req_id is not None:
                emit(error_response(req_id, ErrorCode.PARSE_ERROR, f"parse error: {exc}"))
            else:
                log.warning("dropping unparseable frame with no recoverable id: %r", line[:200])
            continue
        response = server.handle_envelope(session, envelope)
        if response is not None:
            emit(response)
