"""JSON-RPC 2.0 tool-server runtime: envelopes, server state machine, transports, client."""

from .envelopes import (
    PROTOCOL_VERSION,
    ErrorCode,
    RpcError,
    decode_line,
    encode_line,
    error_response,
    make_notification,
    make_request,
    make_response,
    recover_request_id,
)
from .server import McpServer, SessionState, ToolDescriptor, ToolError
from .client import DirectTransport, HttpTransport, McpClient, StdioProcessTransport, TransportError
from .stdio import serve_stdio
from .http import serve_http

__all__ = [
    "PROTOCOL_VERSION",
    "ErrorCode",
    "RpcError",
    "decode_line",
    "encode_line",
    "error_response",
    "make_notification",
    "make_request",
    "make_response",
    "recover_request_id",
    "McpServer",
    "SessionState",
    "ToolDescriptor",
    "ToolError",
    "McpClient",
    "DirectTransport",
    "StdioProcessTransport",
    "HttpTransport",
    "TransportError",
    "serve_stdio",
    "serve_http",
]
