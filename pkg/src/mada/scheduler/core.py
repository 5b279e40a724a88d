"""Job state machine, capacity-safe dispatch, and payload execution.

Policy is FIFO with skip-over: the pending queue is scanned in submit
order and a later job may start only when every earlier pending job does
not fit in the currently free nodes. All public operations are safe
under arbitrary concurrent invocation; one lock guards queue, records,
and allocation, so status snapshots are point-in-time consistent.
"""

from __future__ import annotations

import os
import subprocess
import threading
import traceback
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from .clock import WallClock

_POLL_S = 0.004  # real-time tick for payload polling loops


class SchedulerError(Exception):
    pass


class InvalidSpec(SchedulerError):
    pass


class UnsatisfiableResources(SchedulerError):
    pass


class JobNotFound(SchedulerError):
    pass


class JobState(Enum):
    SUBMITTED = "Submitted"
    PENDING = "Pending"
    RUNNING = "Running"
    COMPLETED = "Completed"
    FAILED = "Failed"
    TIMEOUT = "Timeout"
    CANCELLED = "Cancelled"


TERMINAL_STATES = {JobState.COMPLETED, JobState.FAILED, JobState.TIMEOUT, JobState.CANCELLED}

_LEGAL = {
    JobState.SUBMITTED: {JobState.PENDING},
    JobState.PENDING: {JobState.RUNNING, JobState.CANCELLED},
    JobState.RUNNING: TERMINAL_STATES,
}


@dataclass
class ResourceSpec:
    nodes: int
    tasks_per_node: int = 1
    time_limit_s: float = 3600.0
    job_name: str = "job"
    working_dir: str = "."

    def validate(self) -> None:
        if not isinstance(self.nodes, int) or self.nodes < 1:
            raise InvalidSpec("nodes must be a positive integer")
        if not isinstance(self.tasks_per_node, int) or self.tasks_per_node < 1:
            raise InvalidSpec("tasks_per_node must be a positive integer")
        if not self.time_limit_s > 0:
            raise InvalidSpec("time_limit_s must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ResourceSpec":
        try:
            return cls(
                nodes=data["nodes"],
                tasks_per_node=data.get("tasks_per_node", 1),
                time_limit_s=data.get("time_limit_s", 3600.0),
                job_name=data.get("job_name", "job"),
                working_dir=data.get("working_dir", "."),
            )
        except KeyError as exc:
            raise InvalidSpec(f"resource spec missing field {exc}") from exc


@dataclass
class RunDescription:
    run_id: str
    working_dir: str
    deck_path: str
    resource: ResourceSpec
    command: List[str]

    @classmethod
    def from_dict(cls, data: dict) -> "RunDescription":
        try:
            return cls(
                run_id=data["run_id"],
                working_dir=data["working_dir"],
                deck_path=data.get("deck_path", ""),
                resource=ResourceSpec.from_dict(data["resource"]),
                command=list(data["command"]),
            )
        except KeyError as exc:
            raise InvalidSpec(f"run description missing field {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "working_dir": self.working_dir,
            "deck_path": self.deck_path,
            "resource": {
                "nodes": self.resource.nodes,
                "tasks_per_node": self.resource.tasks_per_node,
                "time_limit_s": self.resource.time_limit_s,
                "job_name": self.resource.job_name,
                "working_dir": self.resource.working_dir,
            },
            "command": list(self.command),
        }


class JobInterrupted(Exception):
    def __init__(self, state: JobState):
        super().__init__(state.value)
        self.state = state


class JobContext:
    """Handed to in-process payloads; sleep() observes cancel and timeout."""

    def __init__(self, record: "JobRecord", clock, deadline: Optional[float],
                 out, err, working_dir: str):
        self._record = record
        self._clock = clock
        self._deadline = deadline
        self.out = out
        self.err = err
        self.working_dir = working_dir

    def check(self) -> None:
        if self._record.cancel_event.is_set():
            raise JobInterrupted(JobState.CANCELLED)
        if self._deadline is not None and self._clock.now() >= self._deadline:
            raise JobInterrupted(JobState.TIMEOUT)

    def sleep(self, duration: float) -> None:
        wake = self._clock.now() + duration
        while True:
            self.check()
            if self._clock.now() >= wake:
                return
            self._record.cancel_event.wait(_POLL_S)


@dataclass
class JobRecord:
    job_id: str
    spec: ResourceSpec
    payload: Any
    state: JobState = JobState.SUBMITTED
    submit_ts: Optional[float] = None
    start_ts: Optional[float] = None
    end_ts: Optional[float] = None
    exit_code: Optional[int] = None
    stdout_path: Optional[str] = None
    stderr_path: Optional[str] = None
    run_id: Optional[str] = None
    history: List[tuple] = field(default_factory=list)
    cancel_event: threading.Event = field(default_factory=threading.Event)
    done_event: threading.Event = field(default_factory=threading.Event)
    allocated_nodes: List[int] = field(default_factory=list)

    def snapshot(self) -> dict:
        return {
            "job_id": self.job_id,
            "name": self.spec.job_name,
            "state": self.state.value,
            "submit_ts": self.submit_ts,
            "start_ts": self.start_ts,
            "end_ts": self.end_ts,
            "exit_code": self.exit_code,
            "stdout_path": self.stdout_path,
            "stderr_path": self.stderr_path,
            "run_id": self.run_id,
        }


class ClusterModel:
    """Node bookkeeping; call sites hold the scheduler lock."""

    def __init__(self, node_count: int, cores_per_node: int = 1):
        if node_count < 1 or cores_per_node < 1:
            raise InvalidSpec("cluster needs at least one node and one core")
        self.node_count = node_count
        self.cores_per_node = cores_per_node
        self.in_use: Dict[int, str] = {}

    @property
    def free_nodes(self) -> int:
        return self.node_count - len(self.in_use)

    def allocate(self, job_id: str, nodes: int) -> List[int]:
        free = [n for n in range(self.node_count) if n not in self.in_use]
        if len(free) < nodes:
            raise UnsatisfiableResources(f"{nodes} nodes requested, {len(free)} free")
        taken = free[:nodes]
        for n in taken:
            self.in_use[n] = job_id
        return taken

    def release(self, nodes: Sequence[int]) -> None:
        for n in nodes:
            self.in_use.pop(n, None)


# Callables registered by name; a RunDescription whose command[0] matches
# runs in-process instead of spawning a subprocess.
PayloadFn = Callable[[JobContext, List[str]], Optional[int]]


class Scheduler:
    def __init__(self, node_count: int, cores_per_node: int = 1, clock=None,
                 registry: Optional[Dict[str, PayloadFn]] = None):
        self.cluster = ClusterModel(node_count, cores_per_node)
        self.clock = clock if clock is not None else WallClock()
        self.registry: Dict[str, PayloadFn] = dict(registry or {})
        self._jobs: Dict[str, JobRecord] = {}
        self._queue: List[str] = []  # pending job ids in submit order
        self._lock = threading.RLock()
        self._counter = 0
        self.events: List[dict] = []  # instrumentation for capacity/FIFO audits

    # ------------------------------------------------------------------
    # Internals (all called with the lock held)

    def _log(self, event: str, job_id: str, **extra) -> None:
        entry = {"ts": self.clock.now(), "event": event, "job_id": job_id,
                 "free_nodes": self.cluster.free_nodes}
        entry.update(extra)
        self.events.append(entry)

    def _set_state(self, record: JobRecord, new: JobState) -> None:
        legal = _LEGAL.get(record.state, set())
        if new not in legal:
            raise RuntimeError(f"illegal transition {record.state.value} -> {new.value}")
        record.state = new
        record.history.append((self.clock.now(), new.value))

    def _finish(self, record: JobRecord, state: JobState, exit_code: Optional[int]) -> None:
        with self._lock:
            self._set_state(record, state)
            record.end_ts = self.clock.now()
            record.exit_code = exit_code
            self.cluster.release(record.allocated_nodes)
            record.allocated_nodes = []
            self._log("finish", record.job_id, state=state.value)
            record.done_event.set()
            self._dispatch()

    def _dispatch(self) -> None:
        """Scan pending jobs in submit order, starting every one that fits."""
        started: List[JobRecord] = []
        with self._lock:
            remaining: List[str] = []
            for job_id in self._queue:
                record = self._jobs[job_id]
                if record.state is not JobState.PENDING:
                    continue  # cancelled while queued
                free_before = self.cluster.free_nodes
                if record.spec.nodes <= free_before:
                    record.allocated_nodes = self.cluster.allocate(job_id, record.spec.nodes)
                    self._set_state(record, JobState.RUNNING)
                    record.start_ts = self.clock.now()
                    self._log("start", job_id, free_before=free_before,
                              nodes=record.spec.nodes)
                    started.append(record)
                else:
                    self._log("skip", job_id, free_before=free_before,
                              nodes=record.spec.nodes)
                    remaining.append(job_id)
            self._queue = remaining
        for record in started:
            thread = threading.Thread(target=self._run_payload, args=(record,),
                                      name=f"job-{record.job_id}", daemon=True)
            thread.start()

    # ------------------------------------------------------------------
    # Payload execution (worker threads)

    def _run_payload(self, record: JobRecord) -> None:
        workdir = Path(record.spec.working_dir).resolve()
        try:
            workdir.mkdir(parents=True, exist_ok=True)
        except OSError:
            self._finish(record, JobState.FAILED, 1)
            return
        record.stdout_path = str(workdir / f"{record.job_id}.out")
        record.stderr_path = str(workdir / f"{record.job_id}.err")
        deadline = record.start_ts + record.spec.time_limit_s
        command = list(record.payload)
        # Files must be closed before the job is marked terminal so that
        # waiters always observe complete output.
        with open(record.stdout_path, "w") as out, open(record.stderr_path, "w") as err:
            fn = self.registry.get(command[0]) if command else None
            if fn is not None:
                state, code = self._run_callable(record, fn, command[1:], deadline,
                                                 out, err, str(workdir))
            else:
                state, code = self._run_subprocess(record, command, deadline,
                                                   out, err, str(workdir))
        self._finish(record, state, code)

    def _run_callable(self, record, fn, argv, deadline, out, err, workdir):
        ctx = JobContext(record, self.clock, deadline, out, err, workdir)
        try:
            code = fn(ctx, argv)
            code = 0 if code is None else int(code)
        except JobInterrupted as stop:
            return stop.state, -9 if stop.state is JobState.TIMEOUT else -15
        except Exception:
            err.write(traceback.format_exc())
            return JobState.FAILED, 1
        return (JobState.COMPLETED if code == 0 else JobState.FAILED), code

    def _run_subprocess(self, record, command, deadline, out, err, workdir):
        try:
            proc = subprocess.Popen(command, stdout=out, stderr=err, cwd=workdir)
        except OSError as exc:
            err.write(f"spawn failed: {exc}\n")
            return JobState.FAILED, 127
        while True:
            code = proc.poll()
            if code is not None:
                return (JobState.COMPLETED if code == 0 else JobState.FAILED), code
            if record.cancel_event.is_set():
                proc.kill()
                proc.wait()
                return JobState.CANCELLED, proc.returncode
            if self.clock.now() >= deadline:
                proc.kill()
                proc.wait()
                return JobState.TIMEOUT, proc.returncode
            record.cancel_event.wait(_POLL_S)

    # ------------------------------------------------------------------
    # Public operations

    def submit_job(self, spec: ResourceSpec, payload: Sequence[str],
                   run_id: Optional[str] = None) -> str:
        spec.validate()
        if spec.nodes > self.cluster.node_count:
            raise UnsatisfiableResources(
                f"{spec.nodes} nodes requested, cluster has {self.cluster.node_count}")
        if not payload:
            raise InvalidSpec("payload command must be nonempty")
        with self._lock:
            self._counter += 1
            job_id = f"job-{self._counter:06d}"
            record = JobRecord(job_id=job_id, spec=spec, payload=list(payload), run_id=run_id)
            record.submit_ts = self.clock.now()
            record.history.append((record.submit_ts, JobState.SUBMITTED.value))
            self._jobs[job_id] = record
            self._log("submit", job_id, nodes=spec.nodes)
            self._set_state(record, JobState.PENDING)
            self._queue.append(job_id)
            self._dispatch()
        return job_id

    def submit_jobs_async(self, runs: Sequence[RunDescription]) -> dict:
        accepted: List[dict] = []
        rejected: List[dict] = []
        for run in runs:
            try:
                if run.deck_path and not os.path.exists(run.deck_path):
                    raise InvalidSpec(f"deck not found: {run.deck_path}")
                spec = replace(run.resource, working_dir=run.working_dir or
                               run.resource.working_dir)
                job_id = self.submit_job(spec, run.command, run_id=run.run_id)
                accepted.append({"run_id": run.run_id, "job_id": job_id})
            except SchedulerError as exc:
                rejected.append({"run_id": run.run_id, "reason": str(exc)})
        return {"accepted": accepted, "rejected": rejected}

    def check_job_status(self, job_id: Optional[str] = None):
        with self._lock:
            if job_id is None:
                return {"jobs": [self._jobs[j].snapshot() for j in sorted(self._jobs)]}
            record = self._jobs.get(job_id)
            if record is None:
                raise JobNotFound(f"no such job: {job_id}")
            return record.snapshot()

    def cancel_job(self, job_id: str) -> str:
        with self._lock:
            record = self._jobs.get(job_id)
            if record is None:
                raise JobNotFound(f"no such job: {job_id}")
            if record.state in TERMINAL_STATES:
                return record.state.value  # idempotent
            if record.state is JobState.PENDING:
                self._set_state(record, JobState.CANCELLED)
                record.end_ts = self.clock.now()
                record.exit_code = -15
                self._queue = [j for j in self._queue if j != job_id]
                self._log("cancel", job_id)
                record.done_event.set()
                return record.state.value
            record.cancel_event.set()  # Running: ask the worker to stop
        record.done_event.wait()
        return record.state.value

    def wait(self, job_ids: Sequence[str], timeout: Optional[float] = None) -> bool:
        """Block until the given jobs are terminal; returns False on real-time timeout."""
        import time as _time

        deadline = None if timeout is None else _time.monotonic() + timeout
        for job_id in job_ids:
            with self._lock:
                record = self._jobs.get(job_id)
                if record is None:
                    raise JobNotFound(f"no such job: {job_id}")
            remaining = None if deadline is None else max(0.0, deadline - _time.monotonic())
            if not record.done_event.wait(remaining):
                return False
        return True

    def execute_generated_runs(self, runs: Sequence[RunDescription]) -> str:
        outcome = self.submit_jobs_async(runs)
        id_by_run = {entry["run_id"]: entry["job_id"] for entry in outcome["accepted"]}
        self.wait([entry["job_id"] for entry in outcome["accepted"]])
        lines = [f"executed {len(runs)} runs on {self.cluster.node_count} nodes"]
        failures = 0
        with self._lock:
            for run in runs:
                job_id = id_by_run.get(run.run_id)
                if job_id is None:
                    reason = next(r["reason"] for r in outcome["rejected"]
                                  if r["run_id"] == run.run_id)
                    lines.append(f"{run.run_id}: rejected ({reason})")
                    failures += 1
                    continue
                record = self._jobs[job_id]
                duration = (record.end_ts or 0.0) - (record.start_ts or 0.0)
                lines.append(
                    f"{run.run_id}: {record.state.value} job_id={job_id} "
                    f"exit={record.exit_code} duration={duration:.3f}s "
                    f"stdout={record.stdout_path} stderr={record.stderr_path}")
                if record.state is not JobState.COMPLETED:
                    failures += 1
        lines.append(f"nonzero or rejected: {failures} of {len(runs)}")
        return "\n".join(lines)
