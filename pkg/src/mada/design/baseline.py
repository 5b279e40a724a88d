"""Multistart projected descent baseline.

One run per start: central finite-difference gradients, steepest-descent
steps with halving Armijo line search, iterates projected onto the bounds.
The per-run trace records best-so-far against cumulative objective
evaluations, which is exactly what the convergence CSV plots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .space import DesignSpace
from .trace import write_convergence_csv

FD_STEP_FRAC = 1e-6
GRAD_TOL = 1e-8
ARMIJO_C = 1e-4
MAX_ITERS = 200
MIN_STEP = 1e-12


@dataclass
class BaselineRun:
    run_id: str
    start: list[float]
    final: list[float]
    objective: float
    evaluations: int
    iterations: int
    converged: bool
    # (cumulative evaluations, best objective so far) appended after every
    # objective call, including finite-difference probes.
    trace: list[tuple[int, float]] = field(default_factory=list)


class _CountingObjective:
    def __init__(self, fn: Callable):
        self.fn = fn
        self.count = 0
        self.best = math.inf
        self.trace: list[tuple[int, float]] = []

    def __call__(self, x) -> float:
        value = float(self.fn(list(x)))
        self.count += 1
        if value < self.best:
            self.best = value
        self.trace.append((self.count, self.best))
        return value


def _gradient(f: _CountingObjective, space: DesignSpace, x: np.ndarray) -> np.ndarray:
    grad = np.zeros(space.dim)
    for d in range(space.dim):
        h = FD_STEP_FRAC * (space.upper[d] - space.lower[d])
        xp = x.copy()
        xm = x.copy()
        # Probes stay inside the box; the true displacement is the divisor.
        xp[d] = min(x[d] + h, space.upper[d])
        xm[d] = max(x[d] - h, space.lower[d])
        denom = xp[d] - xm[d]
        grad[d] = (f(xp) - f(xm)) / denom if denom > 0 else 0.0
    return grad


def descend(objective: Callable, space: DesignSpace, x0, run_id: str = "run",
            max_iters: int = MAX_ITERS) -> BaselineRun:
    f = _CountingObjective(objective)
    x = np.asarray(space.clip(x0), dtype=float)
    fx = f(x)
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        grad = _gradient(f, space, x)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < GRAD_TOL:
            converged = True
            break
        step = 1.0
        moved = False
        while step >= MIN_STEP:
            trial = np.asarray(space.clip(x - step * grad), dtype=float)
            ftrial = f(trial)
            # Projected Armijo: decrease proportional to the actual move.
            if ftrial <= fx - ARMIJO_C * float(grad @ (x - trial)):
                moved = not np.array_equal(trial, x)
                x, fx = trial, ftrial
                break
            step *= 0.5
        if not moved:
            break
    return BaselineRun(
        run_id=run_id,
        start=[float(v) for v in space.clip(x0)],
        final=[float(v) for v in x],
        objective=fx,
        evaluations=f.count,
        iterations=iterations,
        converged=converged,
        trace=f.trace,
    )


def baseline_multistart(objective: Callable, space: DesignSpace, n_starts: int,
                        seed: int, csv_path: str | Path | None = None,
                        max_iters: int = MAX_ITERS) -> list[BaselineRun]:
    """Uniform random starts inside the bounds, one descent each.

    Nonconvergence is reported in the run record, never raised.  When
    csv_path is given, every run's trace lands in one convergence CSV.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    rng = np.random.default_rng(seed)
    runs = []
    for i in range(n_starts):
        x0 = [float(rng.uniform(lo, hi)) for lo, hi in zip(space.lower, space.upper)]
        runs.append(descend(objective, space, x0, run_id=f"run-{i:03d}",
                            max_iters=max_iters))
    if csv_path is not None:
        rows = [
            (run.run_id, evals, best)
            for run in runs
            for evals, best in run.trace
        ]
        write_convergence_csv(csv_path, rows)
    return runs
