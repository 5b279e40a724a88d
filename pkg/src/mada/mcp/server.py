"""Tool-server core: registry, capability handshake, session state machine."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

from .envelopes import (
    PROTOCOL_VERSION,
    ErrorCode,
    RpcError,
    error_response,
    is_notification,
    is_request,
    make_response,
    validate_envelope,
)


class SessionState(Enum):
    UNINITIALIZED = "Uninitialized"
    INITIALIZING = "Initializing"
    READY = "Ready"
    CLOSED = "Closed"


@dataclass
class ToolDescriptor:
    name: str
    description: str
    input_schema: dict

    def to_wire(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "input_schema": self.input_schema,
        }


class ToolError(Exception):
    """Fault inside a tool handler, reported in-band rather than as a transport error."""

    def __init__(self, message: str, details: Any = None):
        super().__init__(message)
        self.details = details


def tool_fault(kind: str, message: str, details: Any = None) -> dict:
    payload: dict = {"is_error": True, "error_type": kind, "message": message}
    if details is not None:
        payload["details"] = details
    return payload


# Structural argument checking: presence plus primitive type, not a full
# schema language.
_TYPE_CHECKS: Dict[str, Callable[[Any], bool]] = {
    "string": lambda v: isinstance(v, str),
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "boolean": lambda v: isinstance(v, bool),
    "array": lambda v: isinstance(v, list),
    "object": lambda v: isinstance(v, dict),
}


def check_arguments(schema: dict, arguments: dict) -> Optional[str]:
    """Return a complaint string if arguments violate the schema, else None."""
    properties = schema.get("properties", {})
    for name in schema.get("required", []):
        if name not in arguments:
            return f"missing required argument {name!r}"
    for name, value in arguments.items():
        prop = properties.get(name)
        if prop is None:
            continue  # unknown keys pass through to the handler
        expected = prop.get("type")
        check = _TYPE_CHECKS.get(expected)
        if check is not None and not check(value):
            return f"argument {name!r} must be of type {expected}"
    return None


@dataclass
class Session:
    transport: str
    state: SessionState = SessionState.UNINITIALIZED
    peer_capabilities: Optional[dict] = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class McpServer:
    """A tool server: named handlers behind the JSON-RPC method surface.

    Handlers receive the arguments dict and return a JSON-serializable
    value, which is passed back verbatim as the call result. A handler
    that raises produces a structured tool-error result on the same
    channel, never a transport-level error.
    """

    def __init__(self, name: str, version: str = "0.1.0"):
        self.name = name
        self.version = version
        self._tools: Dict[str, ToolDescriptor] = {}
        self._handlers: Dict[str, Callable[[dict], Any]] = {}
        self._order: List[str] = []
        self._registry_lock = threading.Lock()

    def register_tool(
        self,
        name: str,
        description: str,
        input_schema: dict,
        handler: Callable[[dict], Any],
    ) -> None:
        if not name:
            raise ValueError("tool name must be nonempty")
        with self._registry_lock:
            if name in self._tools:
                raise ValueError(f"tool {name!r} already registered")
            self._tools[name] = ToolDescriptor(name, description, input_schema)
            self._handlers[name] = handler
            self._order.append(name)

    def capabilities(self) -> dict:
        return {
            "tools": True,
            "resources": True,
            "prompts": True,
            "server_name": self.name,
            "protocol_version": PROTOCOL_VERSION,
        }

    def open_session(self, transport: str = "stdio") -> Session:
        return Session(transport=transport)

    # ------------------------------------------------------------------
    # Dispatch

    def handle_envelope(self, session: Session, envelope: dict) -> Optional[dict]:
        """Process one incoming envelope; return the response (None for notifications)."""
        with session.lock:  # strict arrival-order processing per session
            try:
                validate_envelope(envelope)
            except RpcError as exc:
                return error_response(envelope.get("id") if isinstance(envelope, dict) else None,
                                      exc.code, exc.message, exc.data)
            if is_notification(envelope):
                if envelope["method"] == "close":
                    session.state = SessionState.CLOSED
                return None
            if not is_request(envelope):
                # A stray response envelope; servers do not consume those.
                return error_response(envelope.get("id"), ErrorCode.INVALID_REQUEST,
                                      "server expects requests, not responses")
            req_id = envelope["id"]
            method = envelope["method"]
            params = envelope.get("params", {})
            try:
                result = self._dispatch(session, method, params)
            except RpcError as exc:
                return error_response(req_id, exc.code, exc.message, exc.data)
            return make_response(req_id, result)

    def _dispatch(self, session: Session, method: str, params: dict) -> Any:
        if method == "initialize":
            return self._initialize(session, params)
        if method == "close":
            session.state = SessionState.CLOSED
            return {"closed": True}
        if session.state is SessionState.CLOSED:
            raise RpcError(ErrorCode.SESSION_CLOSED, "session is closed")
        if session.state is not SessionState.READY:
            raise RpcError(ErrorCode.NOT_INITIALIZED, f"{method} requires an initialized session")
        if method == "tools/list":
            with self._registry_lock:
                return {"tools": [self._tools[n].to_wire() for n in self._order]}
        if method == "tools/call":
            return self._call_tool(params)
        if method == "resources/list":
            return {"resources": []}
        if method == "prompts/list":
            return {"prompts": []}
        raise RpcError(ErrorCode.METHOD_NOT_FOUND, f"unknown method {method!r}")

    def _initialize(self, session: Session, params: dict) -> dict:
        if session.state is not SessionState.UNINITIALIZED:
            raise RpcError(ErrorCode.ALREADY_INITIALIZED,
                           "initialize is only accepted on a fresh session")
        session.state = SessionState.INITIALIZING
        version = params.get("protocol_version")
        if version != PROTOCOL_VERSION:
            session.state = SessionState.UNINITIALIZED
            raise RpcError(ErrorCode.VERSION_MISMATCH,
                           f"unsupported protocol version {version!r}, server speaks {PROTOCOL_VERSION!r}")
        session.peer_capabilities = params.get("client_info")
        session.state = SessionState.READY
        return self.capabilities()

    def _call_tool(self, params: dict) -> Any:
        name = params.get("name")
        if not isinstance(name, str):
            raise RpcError(ErrorCode.INVALID_PARAMS, 'tools/call requires a string "name"')
        arguments = params.get("arguments", {})
        if not isinstance(arguments, dict):
            raise RpcError(ErrorCode.INVALID_PARAMS, '"arguments" must be an object')
        with self._registry_lock:
            descriptor = self._tools.get(name)
            handler = self._handlers.get(name)
        if descriptor is None or handler is None:
            raise RpcError(ErrorCode.METHOD_NOT_FOUND, f"unknown tool {name!r}")
        complaint = check_arguments(descriptor.input_schema, arguments)
        if complaint is not None:
            raise RpcError(ErrorCode.INVALID_PARAMS, complaint)
        try:
            return handler(arguments)
        except ToolError as exc:
            return tool_fault(type(exc).__name__, str(exc), exc.details)
        except Exception as exc:  # handler faults stay in-band
            return tool_fault(type(exc).__name__, str(exc))
