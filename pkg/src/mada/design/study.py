"""The round loop: propose, evaluate, rank, converge, with optional expert
approval between rounds.

StudyDriver holds every piece of loop state and exposes one-step methods,
so a caller that wires its own agents around the loop produces exactly the
same evaluations and incumbent as run_study does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .policies import Batch, ExternalPolicy, scripted_proposals, trust_region_proposals
from .space import DesignSpace, StudyConfig
from .trace import TraceWriter, write_convergence_csv

CONVERGENCE_TOL = 1e-9
CONVERGENCE_ROUNDS = 2


class NonFiniteObjective(Exception):
    """A candidate with a non-finite objective reached the ranker."""

    def __init__(self, eval_index: int):
        super().__init__(f"candidate {eval_index} has a non-finite objective")
        self.eval_index = eval_index


class EvaluatorFailure(Exception):
    """An evaluator may raise this to fail a batch; the study records the
    candidates as failed and keeps going."""


@dataclass
class Candidate:
    design: list[float]
    objective: float | None
    round: int
    eval_index: int
    provenance: str
    failed: bool = False
    error: str | None = None

    def summary(self) -> dict:
        return {
            "design": [float(v) for v in self.design],
            "objective": None if self.objective is None else float(self.objective),
            "round": self.round,
            "eval_index": self.eval_index,
            "provenance": self.provenance,
        }


@dataclass
class RoundRecord:
    index: int
    candidates: list[Candidate]
    best: Candidate | None
    incumbent: Candidate | None
    note: str
    n_failed: int = 0


@dataclass
class StudyResult:
    study: str
    rounds: list[RoundRecord]
    incumbent: Candidate | None
    eval_count: int
    stop_reason: str
    events: list[dict] = field(default_factory=list)


def rank_candidates(candidates: list[Candidate], direction: str) -> list[Candidate]:
    """Sort by objective under the study direction; ties go to the earlier
    eval_index.  Every candidate must carry a finite objective."""
    for cand in candidates:
        if cand.objective is None or not math.isfinite(cand.objective):
            raise NonFiniteObjective(cand.eval_index)
    sign = 1.0 if direction == "minimize" else -1.0
    return sorted(candidates, key=lambda c: (sign * c.objective, c.eval_index))


def _better(a: Candidate, b: Candidate, direction: str) -> bool:
    """Strictly better: ties keep the earlier candidate (b)."""
    if direction == "minimize":
        return a.objective < b.objective
    return a.objective > b.objective


class StudyDriver:
    """Stepwise core of a study.

    Usage: while not finished(): batch = next_batch();
    record_results(batch, objectives, errors).  Approval gating and event
    emission live in the callers.
    """

    def __init__(self, config: StudyConfig):
        self.config = config
        self.space: DesignSpace = config.space
        self.rounds: list[RoundRecord] = []
        self.incumbent: Candidate | None = None
        self.eval_count = 0
        self.stopped = False
        self._streak = 0
        self._external: ExternalPolicy | None = None
        self._open_batch: Batch | None = None

    @property
    def rounds_completed(self) -> int:
        return len(self.rounds)

    def finished(self) -> bool:
        return (
            self.stopped
            or self.rounds_completed >= self.config.rounds
            or self._streak >= CONVERGENCE_ROUNDS
        )

    def stop_reason(self) -> str:
        if self.stopped:
            return "stopped"
        if self._streak >= CONVERGENCE_ROUNDS:
            return "converged"
        return "rounds_exhausted"

    def set_bounds(self, lower, upper) -> None:
        self.space = DesignSpace(lower=tuple(lower), upper=tuple(upper),
                                 names=self.space.names)

    def stop(self) -> None:
        self.stopped = True

    def abandon_batch(self) -> None:
        """Discard an un-recorded batch so the round can be re-proposed.

        Proposals are seeded per round, so re-proposing the same round
        yields the same designs for the built-in policies."""
        self._open_batch = None

    def next_batch(self) -> Batch:
        if self.finished():
            raise RuntimeError("study is finished")
        if self._open_batch is not None:
            raise RuntimeError("previous batch has not been recorded")
        round_index = self.rounds_completed + 1
        n = self.config.samples_per_round
        incumbent = list(self.incumbent.design) if self.incumbent else None
        if self.config.policy == "scripted":
            batch = scripted_proposals(round_index, n, self.space, incumbent,
                                       self.config.seed)
        elif self.config.policy == "trust_region":
            batch = trust_region_proposals(round_index, n, self.space, incumbent,
                                           self.config.trust_region_shrink,
                                           self.config.seed)
        else:
            if self._external is None:
                self._external = ExternalPolicy(self.config.policy_command)
            batch = self._external.propose(round_index, n, self.space, incumbent,
                                           [self._round_summary(r) for r in self.rounds])
        self._open_batch = batch
        return batch

    def record_results(self, batch: Batch, objectives: list[float | None],
                       errors: list[str | None] | None = None) -> RoundRecord:
        if batch is not self._open_batch:
            raise RuntimeError("batch does not match the one proposed")
        if len(objectives) != len(batch.designs):
            raise ValueError("one objective per design required")
        errors = errors if errors is not None else [None] * len(objectives)
        candidates = []
        for design, provenance, value, error in zip(
                batch.designs, batch.provenances, objectives, errors):
            failed = value is None or not math.isfinite(value) or error is not None
            candidates.append(Candidate(
                design=list(design),
                objective=None if failed else float(value),
                round=batch.round_index,
                eval_index=self.eval_count,
                provenance=provenance,
                failed=failed,
                error=error if error is not None else (
                    "non-finite objective" if failed else None),
            ))
            self.eval_count += 1
        ranked = rank_candidates([c for c in candidates if not c.failed],
                                 self.config.direction)
        best = ranked[0] if ranked else None
        previous = self.incumbent
        if best is not None and (previous is None
                                 or _better(best, previous, self.config.direction)):
            self.incumbent = best
        if previous is not None and self.incumbent is not None:
            delta = abs(self.incumbent.objective - previous.objective)
            self._streak = self._streak + 1 if delta < CONVERGENCE_TOL else 0
        else:
            self._streak = 0
        record = RoundRecord(
            index=batch.round_index,
            candidates=candidates,
            best=best,
            incumbent=self.incumbent,
            note=batch.note,
            n_failed=sum(1 for c in candidates if c.failed),
        )
        self.rounds.append(record)
        self._open_batch = None
        return record

    def _round_summary(self, record: RoundRecord) -> dict:
        return {
            "round": record.index,
            "best": record.best.summary() if record.best else None,
            "incumbent": record.incumbent.summary() if record.incumbent else None,
            "n_candidates": len(record.candidates),
            "n_failed": record.n_failed,
            "note": record.note,
        }

    def close(self) -> None:
        if self._external is not None:
            self._external.close()
            self._external = None


def evaluate_batch(evaluator: Callable, designs: list[list[float]]):
    """Run the evaluator, turning exceptions into per-candidate failures."""
    try:
        values = evaluator(designs)
        if len(values) != len(designs):
            raise EvaluatorFailure(
                f"evaluator returned {len(values)} values for {len(designs)} designs")
    except Exception as exc:
        return [None] * len(designs), [f"{type(exc).__name__}: {exc}"] * len(designs)
    objectives: list[float | None] = []
    errors: list[str | None] = []
    for value in values:
        try:
            num = float(value)
        except (TypeError, ValueError):
            num = math.nan
        if math.isfinite(num):
            objectives.append(num)
            errors.append(None)
        else:
            objectives.append(None)
            errors.append("non-finite objective")
    return objectives, errors


def run_study(config: StudyConfig, evaluator: Callable | None = None,
              study_name: str = "study", out_dir: str | Path | None = None,
              expert: Callable[[dict], dict] | None = None,
              listener: Callable[[dict], None] | None = None) -> StudyResult:
    """Drive a full study: rounds of propose/evaluate/rank with trace
    events, optional expert approval between rounds, and CSV export.

    With approval_required, `expert` is called after each round with the
    round summary and must return {"action": continue|adjust|stop, ...};
    adjust carries new lower/upper bounds.
    """
    if evaluator is None:
        from .evaluators import build_evaluator
        evaluator = build_evaluator(config, study_name=study_name, out_dir=out_dir)
    if config.approval_required and expert is None:
        raise ValueError("approval_required needs an expert callback")

    out_dir_path = Path(out_dir) if out_dir is not None else None
    trace_path = out_dir_path / f"{study_name}.trace.jsonl" if out_dir_path else None
    if out_dir_path:
        out_dir_path.mkdir(parents=True, exist_ok=True)

    driver = StudyDriver(config)
    csv_rows: list[tuple[str, int, float]] = []
    with TraceWriter(trace_path, listener=listener) as trace:
        while not driver.finished():
            batch = driver.next_batch()
            trace.emit("round_start", batch.round_index, {
                "round": batch.round_index,
                "n_proposals": len(batch.designs),
                "note": batch.note,
                "policy": config.policy,
            })
            objectives, errors = evaluate_batch(evaluator, batch.designs)
            record = driver.record_results(batch, objectives, errors)
            for cand in record.candidates:
                trace.emit("candidate_evaluated", record.index, {
                    "round": record.index,
                    "eval_index": cand.eval_index,
                    "design": cand.design,
                    "objective": cand.objective,
                    "provenance": cand.provenance,
                    "failed": cand.failed,
                    "error": cand.error,
                })
                if driver.incumbent is not None:
                    csv_rows.append((study_name, cand.eval_index,
                                     driver.incumbent.objective))
            trace.emit("round_complete", record.index, driver._round_summary(record))
            if config.approval_required and not driver.finished():
                command = expert(driver._round_summary(record))
                action = command.get("action", "continue")
                trace.emit("expert_action", record.index, {
                    "round": record.index,
                    "action": action,
                    "command": {k: v for k, v in command.items() if k != "action"},
                })
                if action == "stop":
                    driver.stop()
                elif action == "adjust":
                    driver.set_bounds(command["lower"], command["upper"])
                elif action != "continue":
                    raise ValueError(f"unknown expert action {action!r}")
        result = StudyResult(
            study=study_name,
            rounds=driver.rounds,
            incumbent=driver.incumbent,
            eval_count=driver.eval_count,
            stop_reason=driver.stop_reason(),
            events=trace.events,
        )
        trace.emit("study_end", driver.rounds_completed, {
            "rounds_completed": driver.rounds_completed,
            "eval_count": driver.eval_count,
            "incumbent": driver.incumbent.summary() if driver.incumbent else None,
            "reason": result.stop_reason,
        })
        result.events = trace.events
    driver.close()
    if out_dir_path:
        write_convergence_csv(out_dir_path / f"{study_name}.csv", csv_rows)
    return result
