"""Coordination layer: agent registry, context analysis, next-speaker
selection, the phase-machine workflow driver, expert commands, and the
control API the dashboard consumes."""

from .errors import (
    InvalidBounds,
    MaxTurnsExceeded,
    NoActiveStudy,
    NoEligibleAgent,
    NoPendingApproval,
    ToolSessionDown,
    TurnFailure,
    TurnTimeout,
)
from .context import ContextSummary, ConversationHistory, Message, analyze_context
from .state import (
    AgentDescriptor,
    LEGAL_PHASE_TRANSITIONS,
    TurnResult,
    Workspace,
    WorkflowPhase,
)
from .agents import (
    Agent,
    DesignAgent,
    GeometryAgent,
    JobManagerAgent,
    default_team,
)
from .workflow import EXPERT, TERMINATE, Orchestrator, run_workflow, select_next
from .api import ControlServer, serve_control_api

__all__ = [
    "InvalidBounds",
    "MaxTurnsExceeded",
    "NoActiveStudy",
    "NoEligibleAgent",
    "NoPendingApproval",
    "ToolSessionDown",
    "TurnFailure",
    "TurnTimeout",
    "ContextSummary",
    "ConversationHistory",
    "Message",
    "analyze_context",
    "AgentDescriptor",
    "LEGAL_PHASE_TRANSITIONS",
    "TurnResult",
    "Workspace",
    "WorkflowPhase",
    "Agent",
    "DesignAgent",
    "GeometryAgent",
    "JobManagerAgent",
    "default_team",
    "EXPERT",
    "TERMINATE",
    "Orchestrator",
    "run_workflow",
    "select_next",
    "ControlServer",
    "serve_control_api",
]
