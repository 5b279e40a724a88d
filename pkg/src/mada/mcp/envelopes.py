"""JSON-RPC 2.0 envelope helpers and newline-delimited framing."""

from __future__ import annotations

import json
import re
from enum import IntEnum
from typing import Any, Optional, Union

PROTOCOL_VERSION = "mada/1"

JSONRPC = "2.0"

RequestId = Union[int, str]


class ErrorCode(IntEnum):
    """Wire error codes. Reserved values follow JSON-RPC 2.0."""

    PARSE_ERROR = -32700
    INVALID_REQUEST = -32600
    METHOD_NOT_FOUND = -32601
    INVALID_PARAMS = -32602
    INTERNAL_ERROR = -32603
    # Implementation-defined server errors (-32000..-32099).
    NOT_INITIALIZED = -32002
    ALREADY_INITIALIZED = -32003
    VERSION_MISMATCH = -32004
    SESSION_CLOSED = -32005


class RpcError(Exception):
    """Raised by server internals; converted to an error envelope at the edge."""

    def __init__(self, code: int, message: str, data: Any = None):
        super().__init__(message)
        self.code = int(code)
        self.message = message
        self.data = data

    def to_payload(self) -> dict:
        payload: dict = {"code": self.code, "message": self.message}
        if self.data is not None:
            payload["data"] = self.data
        return payload


def make_request(req_id: RequestId, method: str, params: Optional[dict] = None) -> dict:
    req: dict = {"jsonrpc": JSONRPC, "id": req_id, "method": method}
    if params is not None:
        req["params"] = params
    return req


def make_notification(method: str, params: Optional[dict] = None) -> dict:
    note: dict = {"jsonrpc": JSONRPC, "method": method}
    if params is not None:
        note["params"] = params
    return note


def make_response(req_id: RequestId, result: Any) -> dict:
    return {"jsonrpc": JSONRPC, "id": req_id, "result": result}


def error_response(req_id: Optional[RequestId], code: int, message: str, data: Any = None) -> dict:
    err: dict = {"code": int(code), "message": message}
    if data is not None:
        err["data"] = data
    return {"jsonrpc": JSONRPC, "id": req_id, "error": err}


def encode_line(envelope: dict) -> str:
    """Serialize one envelope to a single line (no embedded newlines)."""
    return json.dumps(envelope, separators=(",", ":"), ensure_ascii=False)


_ID_PATTERN = re.compile(r'"id"\s*:\s*("(?:[^"\\]|\\.)*"|-?\d+)')


def recover_request_id(raw: str) -> Optional[RequestId]:
    """Best-effort id extraction from a line that failed to parse as JSON."""
    m = _ID_PATTERN.search(raw)
    if m is None:
        return None
    token = m.group(1)
    try:
        return json.loads(token)
    except ValueError:
        return None


def decode_line(raw: str) -> dict:
    """Parse one framed line into an envelope dict.

    Raises RpcError(PARSE_ERROR) on malformed JSON and
    RpcError(INVALID_REQUEST) on a well-formed object that is not a
    valid JSON-RPC 2.0 message.
    """
    try:
        obj = json.loads(raw)
    except ValueError as exc:
        raise RpcError(ErrorCode.PARSE_ERROR, f"parse error: {exc}") from exc
    validate_envelope(obj)
    return obj


def validate_envelope(obj: Any) -> None:
    if not isinstance(obj, dict):
        raise RpcError(ErrorCode.INVALID_REQUEST, "message must be a JSON object")
    if obj.get("jsonrpc") != JSONRPC:
        raise RpcError(ErrorCode.INVALID_REQUEST, 'missing or wrong "jsonrpc" version')
    if "method" in obj:
        if not isinstance(obj["method"], str):
            raise RpcError(ErrorCode.INVALID_REQUEST, '"method" must be a string')
        if "params" in obj and not isinstance(obj["params"], dict):
            raise RpcError(ErrorCode.INVALID_PARAMS, '"params" must be an object')
        if "id" in obj and not isinstance(obj["id"], (int, str)):
            raise RpcError(ErrorCode.INVALID_REQUEST, '"id" must be a string or integer')
    elif "result" in obj or "error" in obj:
        if "id" not in obj:
            raise RpcError(ErrorCode.INVALID_REQUEST, "response without an id")
    else:
        raise RpcError(ErrorCode.INVALID_REQUEST, "neither a request nor a response")


def is_request(envelope: dict) -> bool:
    return "method" in envelope and "id" in envelope


def is_notification(envelope: dict) -> bool:
    return "method" in envelope and "id" not in envelope
