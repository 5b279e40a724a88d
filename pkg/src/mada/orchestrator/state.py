"""Phase machine vocabulary and the workspace agents act on."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..design import Batch, StudyConfig, StudyDriver, TraceWriter


class WorkflowPhase(Enum):
    NEED_MESH = "NeedMesh"
    NEED_PROPOSALS = "NeedProposals"
    RUNS_PENDING = "RunsPending"
    RESULTS_READY = "ResultsReady"
    AWAITING_EXPERT = "AwaitingExpert"
    DONE = "Done"


# Forward moves only; AwaitingExpert is additionally reachable from any
# non-terminal phase through failure escalation.
LEGAL_PHASE_TRANSITIONS: dict[WorkflowPhase, frozenset[WorkflowPhase]] = {
    WorkflowPhase.NEED_MESH: frozenset({WorkflowPhase.NEED_PROPOSALS}),
    WorkflowPhase.NEED_PROPOSALS: frozenset({WorkflowPhase.RUNS_PENDING}),
    WorkflowPhase.RUNS_PENDING: frozenset({WorkflowPhase.RESULTS_READY}),
    WorkflowPhase.RESULTS_READY: frozenset({
        WorkflowPhase.NEED_PROPOSALS,
        WorkflowPhase.AWAITING_EXPERT,
        WorkflowPhase.DONE,
    }),
    WorkflowPhase.AWAITING_EXPERT: frozenset({
        WorkflowPhase.NEED_PROPOSALS,
        WorkflowPhase.DONE,
    }),
    WorkflowPhase.DONE: frozenset(),
}


@dataclass(frozen=True)
class AgentDescriptor:
    """Registry entry: who an agent is and what it can call."""

    name: str
    role_text: str
    tool_sessions: tuple[str, ...]
    capabilities: tuple[str, ...]


@dataclass
class TurnResult:
    message: str
    next_phase: WorkflowPhase
    payload_ref: Optional[str] = None


@dataclass
class Workspace:
    """Mutable study state shared by the team during one workflow run."""

    config: StudyConfig
    driver: StudyDriver
    trace: TraceWriter
    phase: WorkflowPhase = WorkflowPhase.NEED_MESH
    pending_batch: Optional[Batch] = None
    pending_results: Optional[tuple[list, list]] = None
    mesh: Optional[dict] = None
    csv_rows: list = field(default_factory=list)
    study_name: str = "study"
