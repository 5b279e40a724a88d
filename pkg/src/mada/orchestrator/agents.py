"""The three scripted teammates.

Each agent owns MCP sessions to the tool servers it needs, reads the shared
workspace at the start of its turn, does one phase worth of work through
tool calls, and hands back a short broadcast message plus the phase the
study should move to.  Tool faults surface as TurnFailure so the workflow
can retry or escalate without crashing the run.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Optional

from ..design import StudyConfig
from ..mcp import DirectTransport, McpClient, RpcError, TransportError
from .errors import ToolSessionDown, TurnFailure
from .state import AgentDescriptor, TurnResult, Workspace, WorkflowPhase

TERMINAL_JOB_STATES = {"Completed", "Failed", "Timeout", "Cancelled"}
POLL_INTERVAL_S = 0.01


def _checked(agent: str, client: McpClient, tool: str, arguments: dict):
    """Call a tool and normalize every failure mode to TurnFailure."""
    try:
        result = client.call_tool(tool, arguments)
    except (RpcError, TransportError, OSError) as exc:
        raise TurnFailure(f"{agent}: {tool} call failed: {exc}") from exc
    if isinstance(result, dict) and result.get("is_error"):
        raise TurnFailure(
            f"{agent}: {tool} fault: {result.get('message', 'unknown tool fault')}")
    return result


class Agent:
    """Common shape: named sessions, capability listing, one-turn behavior."""

    name = "agent"
    role_text = ""

    def __init__(self):
        self.sessions: dict[str, McpClient] = {}
        self._closed = False

    def attach(self, session_name: str, client: McpClient) -> None:
        self.sessions[session_name] = client

    def capabilities(self) -> tuple[str, ...]:
        names: list[str] = []
        for client in self.sessions.values():
            names.extend(tool["name"] for tool in client.list_tools())
        return tuple(sorted(set(names)))

    def descriptor(self) -> AgentDescriptor:
        return AgentDescriptor(
            name=self.name,
            role_text=self.role_text,
            tool_sessions=tuple(sorted(self.sessions)),
            capabilities=self.capabilities(),
        )

    def ensure_sessions(self) -> None:
        if self._closed:
            raise ToolSessionDown(self.name, "all")
        for session_name, client in self.sessions.items():
            try:
                client.list_tools()
            except (RpcError, TransportError, OSError) as exc:
                raise ToolSessionDown(self.name, session_name) from exc

    def take_turn(self, workspace: Workspace) -> TurnResult:
        raise NotImplementedError

    def close(self) -> None:
        self._closed = True
        for client in self.sessions.values():
            try:
                client.close()
            except Exception:
                pass
        self.sessions.clear()


class GeometryAgent(Agent):
    """GA: looks up the benchmark plate template, interprets it, and
    verifies the interpreted geometry against the template reference."""

    name = "GA"
    role_text = ("Geometry agent: retrieves command documentation and templates, "
                 "builds the study mesh, and verifies it before runs start.")

    def __init__(self, geometry: McpClient, query: str = "unit square plate mesh",
                 intervals: int = 4):
        super().__init__()
        self.attach("geometry", geometry)
        self.query = query
        self.intervals = intervals

    def take_turn(self, workspace: Workspace) -> TurnResult:
        from ..geokit.templates import instantiate_template

        client = self.sessions["geometry"]
        hits = _checked(self.name, client, "hybrid_retrieve",
                        {"query": self.query, "k": 3})["hits"]
        template = None
        for hit in hits:
            for fn in hit["function_names"]:
                if fn.endswith("_script"):
                    template = fn
                    break
            if template:
                break
        if template is None:
            raise TurnFailure(f"{self.name}: no template chunk matched {self.query!r}")
        script = instantiate_template(template, intervals=self.intervals)
        counts = _checked(self.name, client, "interpret_commands", {"script": script})
        graph = _checked(self.name, client, "serialize_graph", {"script": script})["graph"]
        report = _checked(self.name, client, "verify_geometry",
                          {"candidate": script, "reference": script})
        if not report["ok"]:
            raise TurnFailure(f"{self.name}: mesh verification failed: {report}")
        workspace.mesh = {
            "template": template,
            "script": script,
            "graph": graph,
            "counts": counts,
            "verified": True,
        }
        message = (f"mesh ready: {template} with {counts['vertices']} vertices, "
                   f"{counts['curves']} curves, {counts['surfaces']} surface(s), "
                   f"meshed={counts['meshed_surfaces']}; verification ok "
                   f"(max vertex distance {report['max_distance']:.2e})")
        return TurnResult(message, WorkflowPhase.NEED_PROPOSALS, payload_ref="mesh")


class DesignAgent(Agent):
    """IDA: proposes design batches and ranks results.

    Proposal and ranking logic live in the study driver so a workflow-run
    study and a plain loop produce identical numbers; this agent's job is
    deciding when to propose, when convergence has been reached, and when
    to hand control to the expert."""

    name = "IDA"
    role_text = ("Iterative design agent: proposes candidate designs each round, "
                 "ranks completed results, and declares convergence.")

    def take_turn(self, workspace: Workspace) -> TurnResult:
        if workspace.phase is WorkflowPhase.NEED_PROPOSALS:
            return self._propose(workspace)
        if workspace.phase is WorkflowPhase.RESULTS_READY:
            return self._rank(workspace)
        raise TurnFailure(f"{self.name}: nothing to do in phase {workspace.phase.value}")

    def _propose(self, workspace: Workspace) -> TurnResult:
        driver = workspace.driver
        try:
            batch = driver.next_batch()
        except Exception as exc:
            raise TurnFailure(f"{self.name}: proposal failed: {exc}") from exc
        workspace.pending_batch = batch
        workspace.trace.emit("round_start", batch.round_index, {
            "round": batch.round_index,
            "n_proposals": len(batch.designs),
            "note": batch.note,
            "policy": workspace.config.policy,
        })
        message = (f"round {batch.round_index}: proposing {len(batch.designs)} "
                   f"designs ({batch.note})")
        return TurnResult(message, WorkflowPhase.RUNS_PENDING)

    def _rank(self, workspace: Workspace) -> TurnResult:
        driver = workspace.driver
        if workspace.pending_batch is None or workspace.pending_results is None:
            raise TurnFailure(f"{self.name}: no completed batch to rank")
        objectives, errors = workspace.pending_results
        record = driver.record_results(workspace.pending_batch, objectives, errors)
        for cand in record.candidates:
            workspace.trace.emit("candidate_evaluated", record.index, {
                "round": record.index,
                "eval_index": cand.eval_index,
                "design": cand.design,
                "objective": cand.objective,
                "provenance": cand.provenance,
                "failed": cand.failed,
                "error": cand.error,
            })
            if driver.incumbent is not None:
                workspace.csv_rows.append((workspace.study_name, cand.eval_index,
                                           driver.incumbent.objective))
        workspace.trace.emit("round_complete", record.index,
                             driver._round_summary(record))
        workspace.pending_batch = None
        workspace.pending_results = None
        incumbent = driver.incumbent
        best_text = (f"incumbent {incumbent.objective:.6g} from eval "
                     f"{incumbent.eval_index}" if incumbent else "no finite result yet")
        if driver.finished():
            message = (f"round {record.index} ranked; {best_text}; "
                       f"stopping ({driver.stop_reason()})")
            return TurnResult(message, WorkflowPhase.DONE)
        if workspace.config.approval_required:
            message = f"round {record.index} ranked; {best_text}; awaiting expert approval"
            return TurnResult(message, WorkflowPhase.AWAITING_EXPERT)
        message = f"round {record.index} ranked; {best_text}; proposing next round"
        return TurnResult(message, WorkflowPhase.NEED_PROPOSALS)


class JobManagerAgent(Agent):
    """JMA: turns the staged batch into objective values.

    Surrogate studies evaluate each design through the surrogate server.
    Simulation studies stage decks, submit them to the cluster scheduler,
    poll to completion, and read the QoI from every finished run."""

    name = "JMA"
    role_text = ("Job management agent: stages runs, submits them to the "
                 "scheduler or surrogate, polls status, and collects results.")

    def __init__(self, surrogate: Optional[McpClient] = None,
                 scheduler: Optional[McpClient] = None,
                 sim: Optional[McpClient] = None,
                 staging_root: str | Path | None = None,
                 time_limit_s: float = 60.0):
        super().__init__()
        if surrogate is not None:
            self.attach("surrogate", surrogate)
        if scheduler is not None:
            self.attach("scheduler", scheduler)
        if sim is not None:
            self.attach("sim", sim)
        self.staging_root = Path(staging_root) if staging_root else None
        self.time_limit_s = time_limit_s
        self.cluster = None  # direct handle for stop-drain, set by default_team
        self._batch_counter = 0

    def take_turn(self, workspace: Workspace) -> TurnResult:
        batch = workspace.pending_batch
        if batch is None:
            raise TurnFailure(f"{self.name}: no staged proposals to run")
        if "surrogate" in self.sessions:
            objectives, errors, message = self._evaluate_surrogate(batch.designs)
        elif "scheduler" in self.sessions and "sim" in self.sessions:
            objectives, errors, message = self._evaluate_simulation(batch.designs)
        else:
            raise TurnFailure(f"{self.name}: no evaluation session attached")
        workspace.pending_results = (objectives, errors)
        return TurnResult(message, WorkflowPhase.RESULTS_READY)

    def _evaluate_surrogate(self, designs):
        client = self.sessions["surrogate"]
        objectives = []
        for design in designs:
            out = _checked(self.name, client, "get_objective",
                           {"design": [float(v) for v in design]})
            objectives.append(out["objective"])
        errors = [None] * len(objectives)
        message = (f"evaluated {len(designs)} designs on the surrogate; "
                   f"batch best {min(objectives):.6g}, worst {max(objectives):.6g}")
        return objectives, errors, message

    def _evaluate_simulation(self, designs):
        sim = self.sessions["sim"]
        sched = self.sessions["scheduler"]
        self._batch_counter += 1
        if self.staging_root is None:
            import tempfile
            self.staging_root = Path(tempfile.mkdtemp(prefix="mada-workflow-"))
        staging = self.staging_root / f"batch_{self._batch_counter:03d}"
        staged = _checked(self.name, sim, "generate_runs", {
            "designs": [[float(v) for v in d] for d in designs],
            "staging_dir": str(staging),
            "time_limit_s": self.time_limit_s,
        })["runs"]
        outcome = _checked(self.name, sched, "submit_jobs_async", {"runs": staged})
        job_by_run = {row["run_id"]: row["job_id"] for row in outcome["accepted"]}
        rejected = {row["run_id"]: row["reason"] for row in outcome["rejected"]}
        pending = set(job_by_run.values())
        states: dict[str, str] = {}
        while pending:
            snapshot = _checked(self.name, sched, "check_job_status", {})["jobs"]
            for job in snapshot:
                if job["job_id"] in pending and job["state"] in TERMINAL_JOB_STATES:
                    pending.discard(job["job_id"])
                states[job["job_id"]] = job["state"]
            if pending:
                time.sleep(POLL_INTERVAL_S)
        objectives: list = []
        errors: list = []
        n_completed = 0
        for run in staged:
            run_id = run["run_id"]
            if run_id in rejected:
                objectives.append(None)
                errors.append(f"rejected: {rejected[run_id]}")
                continue
            state = states[job_by_run[run_id]]
            if state != "Completed":
                objectives.append(None)
                errors.append(f"job ended {state}")
                continue
            qoi = _checked(self.name, sim, "get_qoi",
                           {"working_dir": run["working_dir"]})["qoi"]
            objectives.append(qoi)
            errors.append(None)
            n_completed += 1
        message = (f"{len(staged)} runs staged, {n_completed} completed, "
                   f"{len(staged) - n_completed} failed or rejected; "
                   f"all jobs terminal")
        return objectives, errors, message


def default_team(config: StudyConfig, staging_root: str | Path | None = None,
                 mesh_intervals: int = 4) -> dict[str, Agent]:
    """Build GA, JMA, IDA with in-process tool sessions matching the backend."""
    from ..geokit.server import build_geometry_server

    def connect(server, client_name: str) -> McpClient:
        client = McpClient(DirectTransport(server), client_name=client_name)
        client.initialize()
        return client

    ga = GeometryAgent(connect(build_geometry_server(), "ga-geometry"),
                       intervals=mesh_intervals)
    if config.backend.get("kind") == "surrogate":
        from ..surrogate import build_surrogate_server

        jma = JobManagerAgent(surrogate=connect(build_surrogate_server(), "jma-surrogate"))
    else:
        from ..scheduler import Scheduler
        from ..scheduler.server import build_scheduler_server
        from ..simbackend import build_sim_server, scheduler_registry

        scheduler = Scheduler(node_count=int(config.backend.get("nodes", 4)),
                              registry=scheduler_registry())
        jma = JobManagerAgent(
            scheduler=connect(build_scheduler_server(scheduler), "jma-scheduler"),
            sim=connect(build_sim_server(), "jma-sim"),
            staging_root=staging_root,
            time_limit_s=float(config.backend.get("time_limit_s", 60.0)),
        )
        jma.cluster = scheduler
    ida = DesignAgent()
    return {agent.name: agent for agent in (ga, jma, ida)}
