"""Iterative design exploration: sampling, proposal policies, the round
loop with expert approval, trace/replay, and a multistart descent baseline."""

from .space import DesignSpace, StudyConfig, load_config, spline_space
from .sampling import lhs_sample
from .policies import Batch, ExternalPolicy, PolicyUnavailable
from .study import (
    Candidate,
    NonFiniteObjective,
    EvaluatorFailure,
    RoundRecord,
    StudyDriver,
    StudyResult,
    rank_candidates,
    run_study,
)
from .trace import TraceWriter, replay_trace, write_convergence_csv
from .baseline import BaselineRun, baseline_multistart
from .evaluators import (
    SimulationEvaluator,
    analytic_surrogate_objective,
    build_evaluator,
    energy_space,
    surrogate_evaluator,
)

__all__ = [
    "DesignSpace",
    "StudyConfig",
    "load_config",
    "spline_space",
    "lhs_sample",
    "Batch",
    "ExternalPolicy",
    "PolicyUnavailable",
    "Candidate",
    "NonFiniteObjective",
    "EvaluatorFailure",
    "RoundRecord",
    "StudyDriver",
    "StudyResult",
    "rank_candidates",
    "run_study",
    "TraceWriter",
    "replay_trace",
    "write_convergence_csv",
    "BaselineRun",
    "baseline_multistart",
    "SimulationEvaluator",
    "analytic_surrogate_objective",
    "build_evaluator",
    "energy_space",
    "surrogate_evaluator",
]
