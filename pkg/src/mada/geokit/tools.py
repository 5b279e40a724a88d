"""Tool registry with availability probes and fallback chains.

Each tool has a probe (is it usable right now?) and an optional fallback
tool to try next.  Invocation walks the chain until a probe passes; the
outcome records which tool actually ran.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable


class UnknownToolName(Exception):
    """Requested tool was never registered."""


class NoToolAvailable(Exception):
    """Every tool in the fallback chain probed unavailable."""

    def __init__(self, chain: list[str]):
        super().__init__("no tool available, tried: " + " -> ".join(chain))
        self.chain = chain


@dataclass
class ToolEntry:
    name: str
    handler: Callable[..., Any]
    probe: Callable[[], bool]
    fallback: str | None = None


@dataclass
class ToolOutcome:
    result: Any
    tool_name: str
    requested: str
    chain_tried: list[str] = field(default_factory=list)

    @property
    def used_fallback(self) -> bool:
        return self.tool_name != self.requested


class ToolRegistry:
    def __init__(self):
        self._tools: dict[str, ToolEntry] = {}

    def register(self, name: str, handler: Callable[..., Any],
                 probe: Callable[[], bool] | None = None,
                 fallback: str | None = None) -> None:
        if name in self._tools:
            raise ValueError(f"tool {name!r} already registered")
        entry = ToolEntry(name=name, handler=handler,
                          probe=probe if probe is not None else (lambda: True),
                          fallback=fallback)
        # Reject fallback cycles at registration time so invoke never loops.
        seen = {name}
        cursor = fallback
        while cursor is not None:
            if cursor in seen:
                raise ValueError(f"fallback cycle through {cursor!r}")
            seen.add(cursor)
            nxt = self._tools.get(cursor)
            cursor = nxt.fallback if nxt else None
        self._tools[name] = entry

    def names(self) -> list[str]:
        return list(self._tools)

    def invoke(self, name: str, *args: Any, **kwargs: Any) -> ToolOutcome:
        if name not in self._tools:
            raise UnknownToolName(f"tool {name!r} is not registered")
        tried: list[str] = []
        cursor: str | None = name
        while cursor is not None:
            entry = self._tools.get(cursor)
            if entry is None:
                raise UnknownToolName(f"fallback {cursor!r} is not registered")
            tried.append(cursor)
            if entry.probe():
                result = entry.handler(*args, **kwargs)
                return ToolOutcome(result=result, tool_name=cursor,
                                   requested=name, chain_tried=tried)
            cursor = entry.fallback
        raise NoToolAvailable(tried)
