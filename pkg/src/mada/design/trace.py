"""Study event traces: append-only JSONL, replay, and convergence CSV."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

EVENT_KINDS = (
    "round_start",
    "candidate_evaluated",
    "round_complete",
    "expert_action",
    "agent_turn",
    "study_end",
)


def make_event(kind: str, round_index: int, payload: dict) -> dict:
    if kind not in EVENT_KINDS:
        raise ValueError(f"unknown event kind {kind!r}")
    return {"ts": time.time(), "round": int(round_index), "kind": kind, "payload": payload}


class TraceWriter:
    """Appends events to a JSONL file and keeps them in memory.

    Payloads are serialized with sorted keys, so two studies with identical
    behavior produce byte-identical lines apart from the ts field.
    """

    def __init__(self, path: str | Path | None = None,
                 listener: Callable[[dict], None] | None = None):
        self.path = Path(path) if path is not None else None
        self.events: list[dict] = []
        self._listener = listener
        self._fh = open(self.path, "w", encoding="utf-8") if self.path else None

    def emit(self, kind: str, round_index: int, payload: dict) -> dict:
        event = make_event(kind, round_index, payload)
        self.events.append(event)
        if self._fh:
            self._fh.write(json.dumps(event, sort_keys=True) + "\n")
            self._fh.flush()
        if self._listener:
            self._listener(event)
        return event

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace(path: str | Path) -> list[dict]:
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            events.append(json.loads(line))
    return events


@dataclass
class ReplayedStudy:
    """Study state reconstructed purely from a trace file."""

    rounds_completed: int = 0
    eval_count: int = 0
    incumbent: dict | None = None
    stop_reason: str | None = None
    round_summaries: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)


def replay_trace(path: str | Path) -> ReplayedStudy:
    replay = ReplayedStudy()
    for event in read_trace(path):
        replay.events.append(event)
        kind = event["kind"]
        if kind == "candidate_evaluated":
            replay.eval_count += 1
        elif kind == "round_complete":
            replay.rounds_completed += 1
            replay.round_summaries.append(event["payload"])
            if event["payload"].get("incumbent") is not None:
                replay.incumbent = event["payload"]["incumbent"]
        elif kind == "study_end":
            replay.stop_reason = event["payload"].get("reason")
            if event["payload"].get("incumbent") is not None:
                replay.incumbent = event["payload"]["incumbent"]
    return replay


def write_convergence_csv(path: str | Path, rows: list[tuple[str, int, float]]) -> None:
    """Emit run_id, eval_index, best_objective rows (the axes of the
    convergence plots and the dashboard chart)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "eval_index", "best_objective"])
        for run_id, eval_index, best in rows:
            writer.writerow([run_id, int(eval_index), repr(float(best))])
