"""Proposal policies for the round loop.

Three kinds: a scripted schedule standing in for an LLM strategist (the
expert-legible "explore, saturate, refine" playbook), a shrinking trust
region, and an adapter that defers to an external process.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass

import numpy as np

from .sampling import lhs_sample
from .space import DesignSpace


class PolicyUnavailable(Exception):
    """The external proposal process cannot be reached or spoke garbage."""


@dataclass
class Batch:
    round_index: int
    designs: list[list[float]]
    provenances: list[str]
    note: str


def round_rng_seed(seed: int, round_index: int) -> list[int]:
    # Derived stream per round: reproducible and independent across rounds.
    return [int(seed), int(round_index)]


def _alternating(dim: int, scale: float, first: float) -> list[float]:
    return [first * scale if i % 2 == 0 else -first * scale for i in range(dim)]


def _uniform(dim: int, value: float) -> list[float]:
    return [value] * dim


def _step(dim: int, first: float) -> list[float]:
    half = (dim + 1) // 2
    return [first if i < half else -first for i in range(dim)]


def _ramp(dim: int, ascending: bool) -> list[float]:
    if dim == 1:
        return [0.0]
    vals = [-1.0 + 2.0 * i / (dim - 1) for i in range(dim)]
    return vals if ascending else vals[::-1]


def _exploration_patterns(dim: int) -> list[list[float]]:
    return [
        _alternating(dim, 0.88, -1.0),
        _uniform(dim, 1.0),
        _uniform(dim, 0.0),
        _uniform(dim, -1.0),
        _alternating(dim, 0.88, 1.0),
        _step(dim, 1.0),
        _step(dim, -1.0),
        _alternating(dim, 0.5, -1.0),
        _ramp(dim, True),
        _ramp(dim, False),
    ]


def _saturation_patterns(dim: int) -> list[list[float]]:
    return [
        _alternating(dim, 1.0, -1.0),
        _alternating(dim, 1.0, 1.0),
        _alternating(dim, 0.96, -1.0),
        _alternating(dim, 0.96, 1.0),
        _uniform(dim, 1.0),
        _uniform(dim, -1.0),
        _alternating(dim, 0.92, -1.0),
        _alternating(dim, 0.92, 1.0),
    ]


def _scale_pattern(pattern: list[float], space: DesignSpace) -> list[float]:
    out = []
    for frac, lo, hi in zip(pattern, space.lower, space.upper):
        center = (lo + hi) / 2.0
        half = (hi - lo) / 2.0
        out.append(center + frac * half)
    return out


def scripted_proposals(round_index: int, n: int, space: DesignSpace,
                       incumbent: list[float] | None, seed: int) -> Batch:
    """Fixed schedule: round 1 spreads diverse shapes, round 2 saturates
    alternating bound patterns, later rounds nudge the incumbent."""
    designs: list[list[float]] = []
    provenances: list[str] = []
    if round_index == 1:
        note = "round 1: diverse exploration patterns"
        patterns = _exploration_patterns(space.dim)
    elif round_index == 2:
        note = "round 2: bound-saturated alternations"
        patterns = _saturation_patterns(space.dim)
    else:
        note = f"round {round_index}: micro-perturbations around the incumbent"
        patterns = []
    for pattern in patterns[:n]:
        designs.append(_scale_pattern(pattern, space))
        provenances.append("policy")
    if round_index >= 3 and incumbent is not None:
        rng = np.random.default_rng(round_rng_seed(seed, round_index))
        while len(designs) < n:
            point = []
            for base, lo, hi in zip(incumbent, space.lower, space.upper):
                half = (hi - lo) / 2.0
                magnitude = rng.uniform(0.04, 0.12) * half
                sign = 1.0 if rng.random() < 0.5 else -1.0
                point.append(base + sign * magnitude)
            designs.append(space.clip(point))
            provenances.append("policy")
    if len(designs) < n:
        filler = lhs_sample(space, n - len(designs), round_rng_seed(seed, round_index))
        designs.extend(filler)
        provenances.extend(["lhs"] * len(filler))
    return Batch(round_index, designs[:n], provenances[:n], note)


def trust_region_proposals(round_index: int, n: int, space: DesignSpace,
                           incumbent: list[float] | None, shrink: float,
                           seed: int) -> Batch:
    """Round 1 samples the whole box; later rounds sample a box around the
    incumbent whose half-width shrinks geometrically with each completed
    round, clipped to the global bounds."""
    rng_seed = round_rng_seed(seed, round_index)
    if round_index == 1 or incumbent is None:
        designs = lhs_sample(space, n, rng_seed)
        return Batch(round_index, designs, ["lhs"] * n,
                     "round 1: latin hypercube over the full space")
    factor = shrink ** (round_index - 1)
    # Bounds may have been tightened past the incumbent; keep the region
    # centered on the nearest feasible point so it never collapses.
    center = space.clip(incumbent)
    lower = []
    upper = []
    for base, lo, hi in zip(center, space.lower, space.upper):
        half = factor * (hi - lo) / 2.0
        lower.append(max(lo, base - half))
        upper.append(min(hi, base + half))
    region = DesignSpace(lower=tuple(lower), upper=tuple(upper), names=space.names)
    designs = lhs_sample(region, n, rng_seed)
    note = (f"round {round_index}: trust region around the incumbent, "
            f"half-width factor {factor:.6g}")
    return Batch(round_index, designs, ["policy"] * n, note)


class ExternalPolicy:
    """Newline-delimited JSON bridge to a proposal process.

    One request per round: {round, n, space, incumbent, history}; the reply
    must carry {"proposals": [[...], ...], "note": str}.  This is the seam
    where a model-driven strategist plugs in.
    """

    def __init__(self, command: tuple[str, ...]):
        if not command:
            raise PolicyUnavailable("no policy command configured")
        self.command = tuple(command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    list(self.command), stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE, text=True, bufsize=1,
                )
            except OSError as exc:
                raise PolicyUnavailable(f"cannot start {self.command[0]!r}: {exc}") from exc
        return self._proc

    def propose(self, round_index: int, n: int, space: DesignSpace,
                incumbent: list[float] | None, history: list[dict]) -> Batch:
        proc = self._ensure()
        request = {
            "round": round_index,
            "n": n,
            "space": space.to_dict(),
            "incumbent": incumbent,
            "history": history,
        }
        try:
            proc.stdin.write(json.dumps(request, sort_keys=True) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise PolicyUnavailable(f"policy process dropped the pipe: {exc}") from exc
        if not line:
            raise PolicyUnavailable("policy process closed its output")
        try:
            reply = json.loads(line)
            proposals = [space.clip(p) for p in reply["proposals"]]
            note = str(reply.get("note", ""))
        except (ValueError, KeyError, TypeError) as exc:
            raise PolicyUnavailable(f"malformed policy reply: {exc}") from exc
        if len(proposals) != n:
            raise PolicyUnavailable(
                f"policy returned {len(proposals)} proposals, expected {n}")
        return Batch(round_index, proposals, ["policy"] * n, note)

    def close(self) -> None:
        if self._proc is not None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
            self._proc = None
