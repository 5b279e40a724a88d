"""Mock hydrodynamics backend: run-deck staging, a deterministic fake solver
emitting tracer diagnostics, and the scalar quantity of interest.

The solver stands in for a real compressible-hydro code. It initializes a
1D internal-energy profile e(x) = max(0, 0.1 + a1*sin(2*pi*a2*x + a3) + a4)
on the unit interval, reduces it to a total energy E and an asymmetry
moment A by midpoint quadrature, and maps those to interface-tracer
positions and velocities. Deterministic by construction: identical decks
give byte-identical diagnostics.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .scheduler.core import ResourceSpec, RunDescription

QUADRATURE_POINTS = 256

DECK_NAME = "deck.json"
TRACERS_NAME = "tracers.json"

MOCKSIM_COMMAND = "mada-mocksim"


class SimBackendError(Exception):
    pass


class OutOfBounds(SimBackendError):
    def __init__(self, message: str, index: Optional[int] = None, field: Optional[str] = None):
        super().__init__(message)
        self.index = index
        self.field = field


class DeckParseError(SimBackendError):
    pass


class MissingDiagnostics(SimBackendError):
    pass


class NonFiniteDiagnostics(SimBackendError):
    pass


@dataclass
class EnergyDesign:
    """Sinusoidal energy initialization: amplitude, wavenumber, phase, offset."""

    a1: float
    a2: float
    a3: float
    a4: float

    BOUNDS = {
        "a1": (0.0, 0.2),
        "a2": (0.5, 3.0),
        "a3": (0.0, 2.0 * math.pi),
        "a4": (-0.05, 0.2),
    }

    def validate(self, index: Optional[int] = None) -> None:
        for name, (lo, hi) in self.BOUNDS.items():
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise OutOfBounds(f"design {index}: {name} is not a finite number",
                                  index, name)
            if not lo <= value <= hi:
                raise OutOfBounds(
                    f"design {index}: {name}={value} outside [{lo}, {hi}]", index, name)

    @classmethod
    def from_obj(cls, obj: Union[dict, Sequence[float]]) -> "EnergyDesign":
        if isinstance(obj, dict):
            try:
                return cls(float(obj["a1"]), float(obj["a2"]),
                           float(obj["a3"]), float(obj["a4"]))
            except KeyError as exc:
                raise DeckParseError(f"design missing field {exc}") from exc
        values = list(obj)
        if len(values) != 4:
            raise DeckParseError(f"design needs 4 values, got {len(values)}")
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict:
        return {"a1": self.a1, "a2": self.a2, "a3": self.a3, "a4": self.a4}


@dataclass
class QoiParams:
    lambda1: float = 30.0
    lambda2: float = 4.0
    delta: float = 1.0

    def validate(self) -> None:
        if not self.delta > 0:
            raise SimBackendError("delta must be positive")


def energy_profile(design: EnergyDesign, x: np.ndarray) -> np.ndarray:
    raw = 0.1 + design.a1 * np.sin(2.0 * math.pi * design.a2 * x + design.a3) + design.a4
    return np.maximum(0.0, raw)


def simulate(design: EnergyDesign, quadrature_points: int = QUADRATURE_POINTS) -> Dict[str, float]:
    """Reduce the energy profile to tracer diagnostics.

    E = integral of e(x); A = integral of e(x)*sin(2*pi*x), both by
    midpoint quadrature. Tracers: outer interface points follow A
    linearly, the mid point picks up a quadratic bulge, velocities
    follow total energy.
    """
    n = int(quadrature_points)
    if n < 1:
        raise DeckParseError("quadrature_points must be >= 1")
    x = (np.arange(n) + 0.5) / n
    e = energy_profile(design, x)
    total_e = float(np.sum(e) / n)
    moment_a = float(np.sum(e * np.sin(2.0 * math.pi * x)) / n)
    x_outer = 0.05 * moment_a
    velocity = -0.5 * total_e
    return {
        "x1": x_outer,
        "x2": 0.05 * moment_a + 0.8 * moment_a * moment_a,
        "x3": x_outer,
        "v1": velocity,
        "v2": velocity,
        "v3": velocity,
    }


# ----------------------------------------------------------------------
# Deck and diagnostics files


def write_deck(design: EnergyDesign, directory: Union[str, Path],
               quadrature_points: int = QUADRATURE_POINTS) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    deck = dict(design.to_dict(), quadrature_points=int(quadrature_points))
    path = directory / DECK_NAME
    path.write_text(json.dumps(deck, sort_keys=True, indent=2) + "\n")
    return path


def parse_deck(deck_path: Union[str, Path]):
    path = Path(deck_path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise DeckParseError(f"cannot read deck {path}: {exc}") from exc
    except ValueError as exc:
        raise DeckParseError(f"deck {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DeckParseError(f"deck {path} must be a JSON object")
    design = EnergyDesign.from_obj(raw)
    points = raw.get("quadrature_points", QUADRATURE_POINTS)
    if not isinstance(points, int) or points < 1:
        raise DeckParseError("quadrature_points must be a positive integer")
    return design, points


def mock_sim(deck_path: Union[str, Path]) -> Path:
    """Run the fake solver for one deck; writes tracers next to the deck."""
    deck_path = Path(deck_path)
    design, points = parse_deck(deck_path)
    tracers = simulate(design, points)
    out_path = deck_path.parent / TRACERS_NAME
    out_path.write_text(json.dumps(tracers, sort_keys=True) + "\n")
    return out_path


def read_tracers(working_dir: Union[str, Path]) -> Dict[str, float]:
    path = Path(working_dir) / TRACERS_NAME
    if not path.exists():
        raise MissingDiagnostics(f"no {TRACERS_NAME} in {working_dir}")
    try:
        raw = json.loads(path.read_text())
    except ValueError as exc:
        raise MissingDiagnostics(f"unreadable diagnostics {path}: {exc}") from exc
    tracers = {}
    for key in ("x1", "x2", "x3", "v1", "v2", "v3"):
        value = raw.get(key)
        if not isinstance(value, (int, float)):
            raise NonFiniteDiagnostics(f"{key} missing or non-numeric in {path}")
        if not math.isfinite(value):
            raise NonFiniteDiagnostics(f"{key}={value} in {path}")
        tracers[key] = float(value)
    return tracers


def qoi_from_tracers(tracers: Dict[str, float], params: Optional[QoiParams] = None) -> float:
    params = params or QoiParams()
    params.validate()
    x_outer = 0.5 * (tracers["x1"] + tracers["x3"])
    v_ave = (tracers["v1"] + tracers["v2"] + tracers["v3"]) / 3.0
    return (0.5 * params.lambda1 * (tracers["x2"] - x_outer) ** 2
            + params.lambda2 / (params.delta + abs(v_ave)))


def get_qoi(working_dir: Union[str, Path], params: Optional[QoiParams] = None) -> float:
    return qoi_from_tracers(read_tracers(working_dir), params)


def evaluate_design(design: EnergyDesign, params: Optional[QoiParams] = None,
                    quadrature_points: int = QUADRATURE_POINTS) -> float:
    """Deck-free shortcut: same arithmetic as the staged pipeline."""
    design.validate()
    return qoi_from_tracers(simulate(design, quadrature_points), params)


# ----------------------------------------------------------------------
# Run staging


def generate_runs(designs: Sequence[Union[EnergyDesign, dict, Sequence[float]]],
                  staging_dir: Union[str, Path],
                  time_limit_s: float = 60.0) -> List[RunDescription]:
    """Stage one run directory per design; returns descriptions for the scheduler."""
    parsed = [d if isinstance(d, EnergyDesign) else EnergyDesign.from_obj(d)
              for d in designs]
    for index, design in enumerate(parsed):
        design.validate(index)
    staging = Path(staging_dir)
    staging.mkdir(parents=True, exist_ok=True)
    runs: List[RunDescription] = []
    for index, design in enumerate(parsed):
        run_id = f"run_{index:04d}"
        workdir = staging / run_id
        deck_path = write_deck(design, workdir)
        runs.append(RunDescription(
            run_id=run_id,
            working_dir=str(workdir),
            deck_path=str(deck_path),
            resource=ResourceSpec(nodes=1, tasks_per_node=1, time_limit_s=time_limit_s,
                                  job_name=run_id, working_dir=str(workdir)),
            command=[MOCKSIM_COMMAND, str(deck_path)],
        ))
    return runs


def mocksim_payload(ctx, argv: List[str]) -> int:
    """In-process scheduler payload equivalent to the CLI solver."""
    if not argv:
        ctx.err.write("usage: mada-mocksim <deck_path>\n")
        return 2
    deck_path = Path(argv[0])
    if not deck_path.is_absolute():
        deck_path = Path(ctx.working_dir) / deck_path
    try:
        out_path = mock_sim(deck_path)
    except SimBackendError as exc:
        ctx.err.write(f"{exc}\n")
        return 1
    ctx.out.write(f"wrote {out_path}\n")
    return 0


def scheduler_registry() -> dict:
    """Payload registry entry letting the scheduler run the solver in-process."""
    return {MOCKSIM_COMMAND: mocksim_payload}


# ----------------------------------------------------------------------
# MCP surface


def build_sim_server(name: str = "sim-backend"):
    from .mcp import McpServer

    server = McpServer(name)

    def tool_generate_runs(arguments: dict) -> dict:
        runs = generate_runs(arguments["designs"], arguments["staging_dir"],
                             time_limit_s=arguments.get("time_limit_s", 60.0))
        return {"runs": [r.to_dict() for r in runs]}

    server.register_tool(
        "generate_runs",
        "Stage run decks for a batch of designs; returns scheduler-ready run descriptions.",
        {
            "type": "object",
            "properties": {
                "designs": {"type": "array"},
                "staging_dir": {"type": "string"},
                "time_limit_s": {"type": "number"},
            },
            "required": ["designs", "staging_dir"],
        },
        tool_generate_runs,
    )

    def tool_get_qoi(arguments: dict) -> dict:
        params = QoiParams(
            lambda1=arguments.get("lambda1", 30.0),
            lambda2=arguments.get("lambda2", 4.0),
            delta=arguments.get("delta", 1.0),
        )
        return {"qoi": get_qoi(arguments["working_dir"], params)}

    server.register_tool(
        "get_qoi",
        "Compute the scalar quantity of interest from a run's tracer diagnostics.",
        {
            "type": "object",
            "properties": {
                "working_dir": {"type": "string"},
                "lambda1": {"type": "number"},
                "lambda2": {"type": "number"},
                "delta": {"type": "number"},
            },
            "required": ["working_dir"],
        },
        tool_get_qoi,
    )

    return server


def mocksim_main(argv: Optional[List[str]] = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(prog=MOCKSIM_COMMAND,
                                     description="Deterministic mock hydrodynamics solver.")
    parser.add_argument("deck_path", help="path to a deck.json file")
    args = parser.parse_args(argv)
    try:
        out_path = mock_sim(args.deck_path)
    except SimBackendError as exc:
        print(exc, file=sys.stderr)
        return 1
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(mocksim_main())
