"""MCP surface for the scheduler: the four job tools plus cancel_job."""

from __future__ import annotations

from typing import List

from ..mcp import McpServer
from .core import ResourceSpec, RunDescription, Scheduler

_RUNS_SCHEMA = {
    "type": "object",
    "properties": {"runs": {"type": "array"}},
    "required": ["runs"],
}


def _parse_runs(arguments: dict) -> List[RunDescription]:
    return [RunDescription.from_dict(entry) for entry in arguments["runs"]]


def build_scheduler_server(scheduler: Scheduler, name: str = "ensemble-scheduler") -> McpServer:
    server = McpServer(name)

    def submit_job(arguments: dict) -> dict:
        spec = ResourceSpec(
            nodes=arguments["nodes"],
            tasks_per_node=arguments.get("tasks_per_node", 1),
            time_limit_s=arguments.get("time_limit_s", 3600.0),
            job_name=arguments.get("job_name", "job"),
            working_dir=arguments.get("working_dir", "."),
        )
        job_id = scheduler.submit_job(spec, arguments["command"])
        return {"job_id": job_id}

    server.register_tool(
        "submit_job",
        "Submit a single command to the scheduler; returns the job id immediately.",
        {
            "type": "object",
            "properties": {
                "nodes": {"type": "integer"},
                "tasks_per_node": {"type": "integer"},
                "time_limit_s": {"type": "number"},
                "job_name": {"type": "string"},
                "working_dir": {"type": "string"},
                "command": {"type": "array"},
            },
            "required": ["nodes", "command"],
        },
        submit_job,
    )

    server.register_tool(
        "submit_jobs_async",
        "Submit a batch of run descriptions without waiting; returns accepted ids and rejections.",
        _RUNS_SCHEMA,
        lambda arguments: scheduler.submit_jobs_async(_parse_runs(arguments)),
    )

    server.register_tool(
        "check_job_status",
        "Snapshot one job by id, or every managed job when no id is given.",
        {
            "type": "object",
            "properties": {"job_id": {"type": "string"}},
            "required": [],
        },
        lambda arguments: scheduler.check_job_status(arguments.get("job_id")),
    )

    server.register_tool(
        "execute_generated_runs",
        "Submit a batch and block until every run is terminal; returns a textual summary.",
        _RUNS_SCHEMA,
        lambda arguments: {"summary": scheduler.execute_generated_runs(_parse_runs(arguments))},
    )

    server.register_tool(
        "cancel_job",
        "Cancel a pending or running job; terminal jobs are left unchanged.",
        {
            "type": "object",
            "properties": {"job_id": {"type": "string"}},
            "required": ["job_id"],
        },
        lambda arguments: {"job_id": arguments["job_id"],
                           "state": scheduler.cancel_job(arguments["job_id"])},
    )

    return server
