"""Simulated ensemble scheduler: resource model, job state machine, job tools."""

from .clock import SimClock, WallClock
from .core import (
    ClusterModel,
    InvalidSpec,
    JobNotFound,
    JobState,
    JobRecord,
    ResourceSpec,
    RunDescription,
    Scheduler,
    SchedulerError,
    UnsatisfiableResources,
)
from .server import build_scheduler_server

__all__ = [
    "SimClock",
    "WallClock",
    "ClusterModel",
    "InvalidSpec",
    "JobNotFound",
    "JobState",
    "JobRecord",
    "ResourceSpec",
    "RunDescription",
    "Scheduler",
    "SchedulerError",
    "UnsatisfiableResources",
    "build_scheduler_server",
]
