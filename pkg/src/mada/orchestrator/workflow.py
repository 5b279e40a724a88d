"""The workflow driver.

One loop: condense the conversation, pick the next speaker, let it take a
turn, broadcast the result, advance the phase.  Expert commands arrive on a
queue and are honored between turns; a failed turn keeps the phase and is
retried once before the study escalates to the expert.  The driver owns the
trace, the conversation history, and the snapshots the control API serves.
"""

from __future__ import annotations

import math
import threading
import time
from pathlib import Path
from typing import Callable, Optional

from ..design import (
    StudyConfig,
    StudyDriver,
    StudyResult,
    TraceWriter,
    write_convergence_csv,
)
from .agents import Agent, default_team
from .context import ContextSummary, ConversationHistory, analyze_context
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
from .state import LEGAL_PHASE_TRANSITIONS, Workspace, WorkflowPhase

TERMINATE = "Terminate"
EXPERT = "Expert"
COMMAND_TYPES = ("pause", "resume", "set_bounds", "approve_round", "stop")

_RULE_MAP = {
    WorkflowPhase.NEED_MESH: "GA",
    WorkflowPhase.NEED_PROPOSALS: "IDA",
    WorkflowPhase.RUNS_PENDING: "JMA",
    WorkflowPhase.RESULTS_READY: "IDA",
}


def select_next(phase: WorkflowPhase, agents: dict,
                summary: Optional[ContextSummary] = None) -> str:
    """Deterministic next-speaker rule.

    Done terminates, AwaitingExpert yields to the expert, every working
    phase maps to exactly one required agent.  The summary argument exists
    so context-aware selectors can share this signature."""
    if phase is WorkflowPhase.DONE:
        return TERMINATE
    if phase is WorkflowPhase.AWAITING_EXPERT:
        return EXPERT
    wanted = _RULE_MAP[phase]
    if wanted not in agents:
        raise NoEligibleAgent(phase.value, wanted)
    return wanted


class Orchestrator:
    """Drives one study as a multi-agent workflow.

    `run()` blocks until Done; `start()` runs it on a thread so expert
    commands and the control API can steer it live.  The study driver
    underneath is the same one the plain round loop uses, so a workflow
    study lands on the identical incumbent after the identical number of
    evaluations."""

    def __init__(self, config: StudyConfig, study_name: str = "study",
                 out_dir: str | Path | None = None,
                 agents: Optional[dict[str, Agent]] = None,
                 selector: Optional[Callable] = None,
                 max_turns: int = 200,
                 turn_timeout_s: Optional[float] = None,
                 listener: Optional[Callable[[dict], None]] = None):
        self.config = config
        self.study_name = study_name
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        staging = self.out_dir / f"{study_name}-runs" if self.out_dir else None
        self.agents = agents if agents is not None else default_team(
            config, staging_root=staging)
        self.selector = selector or select_next
        self.max_turns = max_turns
        self.turn_timeout_s = turn_timeout_s
        self.history = ConversationHistory()
        self.phase_trace: list[str] = []
        self.result: Optional[StudyResult] = None
        self.interactive = False

        self._external_listener = listener
        self._lock = threading.RLock()
        self._cond = threading.Condition(self._lock)
        self._subscribers: list = []
        self._event_log: list[dict] = []
        trace_path = (self.out_dir / f"{study_name}.trace.jsonl"
                      if self.out_dir else None)
        trace = TraceWriter(trace_path, listener=self._fanout)
        self._workspace = Workspace(config=config, driver=StudyDriver(config),
                                    trace=trace, study_name=study_name)
        self._started = False
        self._finished = False
        self._paused = False
        self._approved = False
        self._stop_requested = False
        self._pending_bounds: Optional[tuple[list, list]] = None
        self._failure_streak = 0
        self._turns_taken = 0
        self._thread: Optional[threading.Thread] = None
        self._error: Optional[BaseException] = None

    # ------------------------------------------------------------------
    # event fan-out

    def _fanout(self, event: dict) -> None:
        if self._external_listener is not None:
            self._external_listener(event)
        with self._lock:
            self._event_log.append(event)
            for queue in self._subscribers:
                queue.put(event)

    def subscribe(self):
        """Atomically snapshot past events and register for future ones."""
        import queue as queue_mod

        with self._lock:
            past = list(self._event_log)
            q: queue_mod.Queue = queue_mod.Queue()
            self._subscribers.append(q)
        return past, q

    def unsubscribe(self, q) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    # ------------------------------------------------------------------
    # expert commands

    def expert_command(self, command: dict) -> dict:
        """Validate a command now; apply it at the next turn boundary."""
        ctype = command.get("type")
        if ctype not in COMMAND_TYPES:
            raise ValueError(f"unknown command type {ctype!r}")
        with self._cond:
            if not self._started:
                raise NoActiveStudy("no study has been started")
            if self._finished:
                if ctype == "stop":
                    return {"ok": True, "type": ctype, "note": "study already finished"}
                raise NoActiveStudy("study already finished")
            if ctype == "pause":
                self._paused = True
            elif ctype == "resume":
                self._paused = False
            elif ctype == "set_bounds":
                self._pending_bounds = self._validated_bounds(command)
            elif ctype == "approve_round":
                if self._workspace.phase is not WorkflowPhase.AWAITING_EXPERT:
                    raise NoPendingApproval(
                        f"no round is blocked (phase {self._workspace.phase.value})")
                self._approved = True
            elif ctype == "stop":
                self._stop_requested = True
            self._cond.notify_all()
            return {"ok": True, "type": ctype, "phase": self._workspace.phase.value}

    def _validated_bounds(self, command: dict) -> tuple[list, list]:
        lower = command.get("lower")
        upper = command.get("upper")
        dim = self._workspace.driver.space.dim
        if (not isinstance(lower, (list, tuple)) or not isinstance(upper, (list, tuple))
                or len(lower) != dim or len(upper) != dim):
            raise InvalidBounds(f"bounds must be two lists of length {dim}")
        try:
            lo = [float(v) for v in lower]
            hi = [float(v) for v in upper]
        except (TypeError, ValueError) as exc:
            raise InvalidBounds(f"bounds must be numeric: {exc}") from exc
        for axis, (a, b) in enumerate(zip(lo, hi)):
            if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
                raise InvalidBounds(
                    f"axis {axis}: lower {a!r} must be strictly below upper {b!r}")
        return lo, hi

    # ------------------------------------------------------------------
    # snapshots for the control API

    def study_snapshot(self) -> dict:
        with self._lock:
            if not self._started:
                raise NoActiveStudy("no study has been started")
            ws = self._workspace
            driver = ws.driver
            return {
                "study": self.study_name,
                "phase": ws.phase.value,
                "direction": self.config.direction,
                "backend": dict(self.config.backend),
                "policy": self.config.policy,
                "rounds_planned": self.config.rounds,
                "rounds_completed": driver.rounds_completed,
                "eval_count": driver.eval_count,
                "incumbent": driver.incumbent.summary() if driver.incumbent else None,
                "paused": self._paused,
                "finished": self._finished,
                "stop_reason": self.result.stop_reason if self.result else None,
            }

    def rounds_snapshot(self) -> list[dict]:
        with self._lock:
            if not self._started:
                raise NoActiveStudy("no study has been started")
            driver = self._workspace.driver
            return [driver._round_summary(r) for r in driver.rounds]

    def trace_page(self, offset: int = 0, limit: int = 100) -> dict:
        with self._lock:
            if not self._started:
                raise NoActiveStudy("no study has been started")
            total = len(self._event_log)
            offset = max(0, offset)
            page = self._event_log[offset: offset + max(0, limit)]
            return {"events": page, "offset": offset,
                    "next_offset": offset + len(page), "total": total}

    def field_export(self, design: list[float]) -> dict:
        if self.config.backend.get("kind") != "surrogate":
            raise ValueError("field preview is only available for surrogate studies")
        from ..surrogate import get_objective, predict_field

        export = predict_field(design).to_export()
        export["objective"] = get_objective(design)
        export["design"] = [float(v) for v in design]
        return export

    # ------------------------------------------------------------------
    # the drive loop

    def run(self, expert: Optional[Callable[[dict], dict]] = None) -> StudyResult:
        with self._cond:
            if self._started:
                raise RuntimeError("workflow already started")
            self._started = True
            self._set_phase(WorkflowPhase.NEED_MESH, initial=True)
        ws = self._workspace
        try:
            while True:
                action = self._turn_boundary(expert)
                if action == "done":
                    break
                if self._turns_taken >= self.max_turns:
                    raise MaxTurnsExceeded(self.max_turns)
                summary = self._context_summary()
                speaker = self.selector(ws.phase, self.agents, summary)
                if speaker == TERMINATE:
                    break
                if speaker == EXPERT:
                    continue
                agent = self.agents[speaker]
                self._take_turn(agent, summary)
            return self._finalize()
        finally:
            ws.trace.close()
            if self.out_dir:
                write_convergence_csv(self.out_dir / f"{self.study_name}.csv",
                                      ws.csv_rows)

    def start(self, expert: Optional[Callable[[dict], dict]] = None) -> threading.Thread:
        """Run the workflow on a daemon thread; commands steer it live."""
        self.interactive = True

        def target():
            try:
                self.run(expert)
            except BaseException as exc:  # surfaced via join()
                self._error = exc
                with self._cond:
                    self._finished = True
                    self._cond.notify_all()

        self._thread = threading.Thread(target=target, daemon=True,
                                        name=f"workflow-{self.study_name}")
        self._thread.start()
        return self._thread

    def join(self, timeout: Optional[float] = None) -> StudyResult:
        if self._thread is None:
            raise RuntimeError("workflow was not started with start()")
        self._thread.join(timeout)
        if self._thread.is_alive():
            raise TimeoutError("workflow still running")
        if self._error is not None:
            raise self._error
        assert self.result is not None
        return self.result

    def close(self) -> None:
        for agent in self.agents.values():
            agent.close()

    # ------------------------------------------------------------------
    # internals

    def _context_summary(self) -> ContextSummary:
        ws = self._workspace
        return analyze_context(
            self.history,
            {name: a.capabilities() for name, a in self.agents.items()},
            self.config.to_dict(),
            ws.driver.incumbent.summary() if ws.driver.incumbent else None,
        )

    def _set_phase(self, phase: WorkflowPhase, initial: bool = False) -> None:
        ws = self._workspace
        if not initial:
            legal = LEGAL_PHASE_TRANSITIONS[ws.phase]
            escalation = phase is WorkflowPhase.AWAITING_EXPERT
            if phase is not ws.phase and phase not in legal and not escalation:
                raise RuntimeError(
                    f"illegal phase move {ws.phase.value} -> {phase.value}")
        ws.phase = phase
        if not self.phase_trace or self.phase_trace[-1] != phase.value:
            self.phase_trace.append(phase.value)
        self._cond.notify_all()

    def _turn_boundary(self, expert) -> str:
        """Apply queued commands; block while paused or awaiting the expert.

        Returns "go" when an agent should speak next, "done" when the
        workflow reached Done.  Without any expert (no callback, nothing
        interactive attached) a blocked approval point degrades to stop so
        a headless run can never deadlock."""
        ws = self._workspace
        while True:
            with self._cond:
                if self._pending_bounds is not None:
                    lower, upper = self._pending_bounds
                    self._pending_bounds = None
                    ws.driver.set_bounds(lower, upper)
                    self._emit_expert_action("set_bounds",
                                             {"lower": lower, "upper": upper})
                    self.history.broadcast(
                        "Expert", f"design space bounds replaced: {lower} .. {upper}")
                if self._stop_requested:
                    self._stop_requested = False
                    self._drain_jobs()
                    ws.driver.stop()
                    if ws.pending_batch is not None:
                        ws.driver.abandon_batch()
                        ws.pending_batch = None
                        ws.pending_results = None
                    self._emit_expert_action("stop", {})
                    self.history.broadcast("Expert", "stop requested; study finalized")
                    self._set_phase(WorkflowPhase.DONE)
                    return "done"
                if ws.phase is WorkflowPhase.DONE:
                    return "done"
                if ws.phase is WorkflowPhase.AWAITING_EXPERT:
                    if self._approved:
                        self._approved = False
                        if ws.pending_batch is not None:
                            ws.driver.abandon_batch()
                            ws.pending_batch = None
                            ws.pending_results = None
                        self._emit_expert_action("approve_round", {})
                        self.history.broadcast("Expert", "round approved; continuing")
                        self._set_phase(WorkflowPhase.NEED_PROPOSALS)
                        continue
                    if expert is None:
                        if self.interactive:
                            self._cond.wait(0.05)
                            continue
                        self.history.broadcast(
                            "Expert", "no expert attached; stopping at approval point")
                        self._stop_requested = True
                        continue
                elif self._paused:
                    self._cond.wait(0.05)
                    continue
                else:
                    return "go"
            # Expert callback runs outside the lock.
            self._consult_expert(expert)

    def _consult_expert(self, expert) -> None:
        driver = self._workspace.driver
        if driver.rounds:
            summary = driver._round_summary(driver.rounds[-1])
        else:
            summary = {"round": 0, "best": None, "incumbent": None,
                       "n_candidates": 0, "n_failed": 0, "note": "no completed rounds"}
        last = self.history.messages[-1].summary if len(self.history) else ""
        if "failure" in last or "failed" in last:
            summary = dict(summary)
            summary["failure"] = last
        command = expert(summary)
        action = command.get("action", "continue")
        with self._cond:
            if action == "stop":
                self._stop_requested = True
            elif action == "adjust":
                self._pending_bounds = self._validated_bounds(
                    {"lower": command.get("lower"), "upper": command.get("upper")})
                self._approved = True
            elif action == "continue":
                self._approved = True
            else:
                raise ValueError(f"unknown expert action {action!r}")

    def _emit_expert_action(self, action: str, command: dict) -> None:
        ws = self._workspace
        ws.trace.emit("expert_action", ws.driver.rounds_completed, {
            "round": ws.driver.rounds_completed,
            "action": action,
            "command": command,
        })

    def _drain_jobs(self) -> None:
        """Cancel anything still queued or running on the cluster."""
        for agent in self.agents.values():
            cluster = getattr(agent, "cluster", None)
            if cluster is None:
                continue
            try:
                for job in cluster.check_job_status()["jobs"]:
                    if job["state"] in ("Submitted", "Pending", "Running"):
                        cluster.cancel_job(job["job_id"])
            except Exception:
                pass

    def _take_turn(self, agent: Agent, summary: ContextSummary) -> None:
        ws = self._workspace
        phase_before = ws.phase
        started = time.monotonic()
        failure: Optional[str] = None
        result = None
        try:
            agent.ensure_sessions()
            result = agent.take_turn(ws)
            if (self.turn_timeout_s is not None
                    and time.monotonic() - started > self.turn_timeout_s):
                raise TurnTimeout(agent.name, self.turn_timeout_s)
        except (TurnFailure, ToolSessionDown, TurnTimeout) as exc:
            failure = str(exc)
        self._turns_taken += 1
        with self._cond:
            if failure is not None:
                message = self.history.broadcast(agent.name, f"turn failed: {failure}")
                self._failure_streak += 1
                escalate = self._failure_streak >= 2
                ws.trace.emit("agent_turn", ws.driver.rounds_completed, {
                    "turn": message.turn,
                    "speaker": agent.name,
                    "phase_before": phase_before.value,
                    "phase_after": (WorkflowPhase.AWAITING_EXPERT.value if escalate
                                    else phase_before.value),
                    "message": message.summary,
                    "failed": True,
                })
                if escalate:
                    self._failure_streak = 0
                    if ws.pending_batch is not None:
                        ws.driver.abandon_batch()
                        ws.pending_batch = None
                        ws.pending_results = None
                    self.history.broadcast(
                        agent.name, "second consecutive failure; handing to expert")
                    self._set_phase(WorkflowPhase.AWAITING_EXPERT)
                return
            self._failure_streak = 0
            message = self.history.broadcast(agent.name, result.message,
                                             payload_ref=result.payload_ref)
            ws.trace.emit("agent_turn", ws.driver.rounds_completed, {
                "turn": message.turn,
                "speaker": agent.name,
                "phase_before": phase_before.value,
                "phase_after": result.next_phase.value,
                "message": message.summary,
                "failed": False,
            })
            self._set_phase(result.next_phase)

    def _finalize(self) -> StudyResult:
        ws = self._workspace
        driver = ws.driver
        with self._cond:
            result = StudyResult(
                study=self.study_name,
                rounds=driver.rounds,
                incumbent=driver.incumbent,
                eval_count=driver.eval_count,
                stop_reason=driver.stop_reason(),
                events=ws.trace.events,
            )
            ws.trace.emit("study_end", driver.rounds_completed, {
                "rounds_completed": driver.rounds_completed,
                "eval_count": driver.eval_count,
                "incumbent": driver.incumbent.summary() if driver.incumbent else None,
                "reason": result.stop_reason,
            })
            result.events = ws.trace.events
            self.result = result
            self._finished = True
            driver.close()
            self._cond.notify_all()
        return result


def run_workflow(config: StudyConfig, study_name: str = "study",
                 out_dir: str | Path | None = None,
                 agents: Optional[dict[str, Agent]] = None,
                 expert: Optional[Callable[[dict], dict]] = None,
                 max_turns: int = 200,
                 selector: Optional[Callable] = None) -> StudyResult:
    """Blocking convenience wrapper: build the team, drive to Done."""
    orchestrator = Orchestrator(config, study_name=study_name, out_dir=out_dir,
                                agents=agents, selector=selector, max_turns=max_turns)
    try:
        return orchestrator.run(expert)
    finally:
        orchestrator.close()
