"""Shared conversation state and the context analyzer.

Every agent turn produces one message that is broadcast to the whole team.
Before each turn the analyzer condenses the history into a bounded summary:
the study configuration and incumbent are pinned, the most recent messages
are kept up to a window and a character budget, and per-agent capability
lists are always present so the selector can reason about who can act.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

DEFAULT_WINDOW = 12
DEFAULT_CHAR_BUDGET = 6000
MESSAGE_CHAR_LIMIT = 500


@dataclass(frozen=True)
class Message:
    turn: int
    speaker: str
    summary: str
    payload_ref: Optional[str] = None

    def render(self) -> str:
        ref = f" [{self.payload_ref}]" if self.payload_ref else ""
        return f"#{self.turn} {self.speaker}: {self.summary}{ref}"


class ConversationHistory:
    """Append-only, strictly increasing turn numbers, visible to all agents."""

    def __init__(self):
        self._messages: list[Message] = []

    def broadcast(self, speaker: str, summary: str, payload_ref: str | None = None) -> Message:
        if len(summary) > MESSAGE_CHAR_LIMIT:
            summary = summary[: MESSAGE_CHAR_LIMIT - 3] + "..."
        msg = Message(
            turn=len(self._messages) + 1,
            speaker=speaker,
            summary=summary,
            payload_ref=payload_ref,
        )
        self._messages.append(msg)
        return msg

    @property
    def messages(self) -> tuple[Message, ...]:
        return tuple(self._messages)

    def __len__(self) -> int:
        return len(self._messages)

    def __iter__(self):
        return iter(self._messages)


@dataclass
class ContextSummary:
    """What an agent sees at the start of its turn."""

    config: dict
    incumbent: Optional[dict]
    messages: list[Message] = field(default_factory=list)
    capabilities: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def render(self) -> str:
        parts = ["study config: " + json.dumps(self.config, sort_keys=True)]
        if self.incumbent is not None:
            parts.append("incumbent: " + json.dumps(self.incumbent, sort_keys=True))
        for name in sorted(self.capabilities):
            tools = ", ".join(self.capabilities[name]) or "none"
            parts.append(f"agent {name} can use: {tools}")
        for msg in self.messages:
            parts.append(msg.render())
        return "\n".join(parts)

    def __len__(self) -> int:
        return len(self.render())


def analyze_context(
    history: ConversationHistory | Sequence[Message],
    agents: Mapping[str, Sequence[str]],
    config: dict,
    incumbent: Optional[dict] = None,
    window: int = DEFAULT_WINDOW,
    char_budget: int = DEFAULT_CHAR_BUDGET,
) -> ContextSummary:
    """Condense the conversation for the next turn.

    Config, incumbent, and capabilities are pinned. Messages beyond the
    window are dropped, then the oldest surviving messages are evicted one
    at a time until the rendered summary fits the character budget.
    """
    msgs = list(history.messages if isinstance(history, ConversationHistory) else history)
    kept = msgs[-window:] if window > 0 else []
    summary = ContextSummary(
        config=dict(config),
        incumbent=dict(incumbent) if incumbent is not None else None,
        messages=kept,
        capabilities={name: tuple(tools) for name, tools in agents.items()},
    )
    while summary.messages and len(summary) > char_budget:
        summary.messages.pop(0)
    return summary
