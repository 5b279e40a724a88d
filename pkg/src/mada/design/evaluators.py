"""Objective evaluators behind the round loop.

The surrogate path is a direct function call; the simulation path stages
decks, submits them to the cluster scheduler, waits for completion, and
reads diagnostics back from each run directory.
"""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import Callable

from ..scheduler import JobState, Scheduler
from ..simbackend import (
    EnergyDesign,
    SimBackendError,
    generate_runs,
    get_qoi,
    scheduler_registry,
)
from .space import StudyConfig


def surrogate_evaluator(resolution: int | None = None) -> Callable:
    from ..surrogate import DEFAULT_RESOLUTION, SplineDesign, get_objective

    res = resolution if resolution is not None else DEFAULT_RESOLUTION

    def evaluate(designs):
        return [get_objective(SplineDesign(tuple(d)), resolution=res) for d in designs]

    return evaluate


def analytic_surrogate_objective() -> Callable:
    """Grid-free jet length: the smooth variant descent methods need.

    The quantized field objective is piecewise constant, so its
    finite-difference gradient vanishes almost everywhere; the baseline
    descends this analytic form instead.
    """
    from ..surrogate import SplineDesign, analytic_jet_length

    def fn(x) -> float:
        return analytic_jet_length(SplineDesign(tuple(x)))

    return fn


class SimulationEvaluator:
    """Batch evaluator that fans designs out as scheduler jobs.

    Each batch becomes one staged ensemble: deck per design, one job per
    deck, QoI read from the run directory once the job completes.  Failed
    or rejected runs come back as None so the study marks them failed
    without aborting the round.
    """

    def __init__(self, nodes: int = 4, staging_dir: str | Path | None = None,
                 time_limit_s: float = 60.0, scheduler: Scheduler | None = None):
        self.scheduler = scheduler if scheduler is not None else Scheduler(
            node_count=nodes, registry=scheduler_registry())
        root = staging_dir if staging_dir is not None else tempfile.mkdtemp(
            prefix="mada-ensemble-")
        self.staging_root = Path(root)
        self.staging_root.mkdir(parents=True, exist_ok=True)
        self.time_limit_s = time_limit_s
        self._batch_index = 0

    def __call__(self, designs) -> list:
        self._batch_index += 1
        staging = self.staging_root / f"batch_{self._batch_index:03d}"
        runs = generate_runs([EnergyDesign.from_obj(d) for d in designs],
                             staging, time_limit_s=self.time_limit_s)
        outcome = self.scheduler.submit_jobs_async(runs)
        job_by_run = {row["run_id"]: row["job_id"] for row in outcome["accepted"]}
        rejected = {row["run_id"] for row in outcome["rejected"]}
        self.scheduler.wait(list(job_by_run.values()))
        values = []
        for run in runs:
            if run.run_id in rejected:
                values.append(None)
                continue
            status = self.scheduler.check_job_status(job_by_run[run.run_id])
            if status["state"] != JobState.COMPLETED.value:
                values.append(None)
                continue
            try:
                values.append(get_qoi(run.working_dir))
            except SimBackendError:
                values.append(None)
        return values


def energy_space():
    """Design space matching the energy-source deck bounds."""
    from .space import DesignSpace

    names = ("a1", "a2", "a3", "a4")
    return DesignSpace(
        lower=tuple(EnergyDesign.BOUNDS[k][0] for k in names),
        upper=tuple(EnergyDesign.BOUNDS[k][1] for k in names),
        names=names,
    )


def build_evaluator(config: StudyConfig, study_name: str = "study",
                    out_dir: str | Path | None = None) -> Callable:
    backend = config.backend
    kind = backend.get("kind")
    if kind == "surrogate":
        return surrogate_evaluator(resolution=backend.get("resolution"))
    if kind == "simulation":
        staging = backend.get("staging_dir")
        if staging is None and out_dir is not None:
            staging = Path(out_dir) / f"{study_name}-runs"
        return SimulationEvaluator(
            nodes=int(backend.get("nodes", 4)),
            staging_dir=staging,
            time_limit_s=float(backend.get("time_limit_s", 60.0)),
        )
    raise ValueError(f"unknown backend kind {kind!r}")
