"""Analytic jet-growth surrogate: spline interface designs, a synthetic
two-material density field, and jet length as the design objective.

The interface perturbation is a shape-preserving cubic through four
control values at equally spaced heights. A closed-form growth model
magnifies the centered perturbation; jet length is the spread of the
per-row copper/air transition. Pure functions throughout; safe for
concurrent evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .pchip import PchipInterpolant

BOUND = 0.25
KNOTS_Y = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)

RHO_CU = 8.93
RHO_AIR = 0.001

DEFAULT_RESOLUTION = 128
MIN_RESOLUTION = 64


class SurrogateError(Exception):
    pass


class OutOfBounds(SurrogateError):
    pass


class NoInterface(SurrogateError):
    pass


@dataclass
class SplineDesign:
    """Four interface control values (cm) at heights 0, 1/3, 2/3, 1."""

    p: List[float]

    def __post_init__(self):
        self.p = [float(v) for v in self.p]

    def validate(self) -> None:
        if len(self.p) != 4:
            raise OutOfBounds(f"design needs 4 control values, got {len(self.p)}")
        for i, value in enumerate(self.p):
            if not np.isfinite(value):
                raise OutOfBounds(f"P{i + 1} is not finite")
            if abs(value) > BOUND:
                raise OutOfBounds(f"P{i + 1}={value} outside [-{BOUND}, {BOUND}]")

    @classmethod
    def from_obj(cls, obj: Union["SplineDesign", Sequence[float]]) -> "SplineDesign":
        if isinstance(obj, SplineDesign):
            return obj
        return cls(list(obj))


@dataclass
class GrowthModel:
    g0: float = 2.0
    alpha: float = 0.1

    def validate(self) -> None:
        if not self.g0 > 0:
            raise SurrogateError("g0 must be positive")
        if self.alpha < 0:
            raise SurrogateError("alpha must be nonnegative")

    def magnification(self, design: SplineDesign) -> float:
        # Total-variation term: sum |dP| / (3*dy) with dy = 1/3, so the
        # denominator is exactly 1 for the fixed knot layout.
        dy = KNOTS_Y[1] - KNOTS_Y[0]
        variation = sum(abs(b - a) for a, b in zip(design.p, design.p[1:]))
        return self.g0 * (1.0 + self.alpha * variation / (3.0 * dy))


@dataclass
class DensityField:
    grid: np.ndarray  # ny x nx, values RHO_CU or RHO_AIR
    dx: float
    dy: float
    x_origin: float

    @property
    def ny(self) -> int:
        return self.grid.shape[0]

    @property
    def nx(self) -> int:
        return self.grid.shape[1]

    def to_export(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "dx": self.dx,
            "dy": self.dy,
            "x_origin": self.x_origin,
            "data": [float(v) for v in self.grid.ravel()],
        }


def interface_curve(design: SplineDesign, rows: np.ndarray,
                    model: Optional[GrowthModel] = None) -> np.ndarray:
    """Magnified, mean-centered interface x-positions at the given heights."""
    model = model or GrowthModel()
    model.validate()
    design.validate()
    s = PchipInterpolant(KNOTS_Y, design.p)(rows)
    return model.magnification(design) * (s - np.mean(s))


def predict_field(design: Union[SplineDesign, Sequence[float]],
                  model: Optional[GrowthModel] = None,
                  resolution: int = DEFAULT_RESOLUTION) -> DensityField:
    design = SplineDesign.from_obj(design)
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION}")
    ny = nx = int(resolution)
    rows = np.arange(ny) / (ny - 1)
    x_final = interface_curve(design, rows, model)
    dx = 2.0 / nx
    centers = -1.0 + (np.arange(nx) + 0.5) * dx
    grid = np.where(centers[None, :] <= x_final[:, None], RHO_CU, RHO_AIR)
    return DensityField(grid=grid, dx=dx, dy=1.0 / (ny - 1), x_origin=-1.0)


def transition_positions(field: DensityField) -> np.ndarray:
    """Per-row x-coordinate of the copper/air boundary."""
    copper = field.grid == RHO_CU
    counts = copper.sum(axis=1)
    if np.any(counts == 0) or np.any(counts == field.nx):
        bad = int(np.argmax((counts == 0) | (counts == field.nx)))
        raise NoInterface(f"row {bad} has no material transition")
    # Copper fills a prefix of each row, so the boundary sits after cell k-1.
    if not np.all(copper[:, 0]):
        raise NoInterface("a row does not start in copper")
    return field.x_origin + counts * field.dx


def jet_length(field: DensityField) -> float:
    positions = transition_positions(field)
    return float(positions.max() - positions.min())


def analytic_jet_length(design: Union[SplineDesign, Sequence[float]],
                        model: Optional[GrowthModel] = None,
                        resolution: int = DEFAULT_RESOLUTION) -> float:
    """Grid-free jet length: magnification times the sampled interface range."""
    design = SplineDesign.from_obj(design)
    rows = np.arange(resolution) / (resolution - 1)
    curve = interface_curve(design, rows, model)
    return float(curve.max() - curve.min())


def get_objective(design: Union[SplineDesign, Sequence[float]],
                  direction: str = "minimize",
                  model: Optional[GrowthModel] = None,
                  resolution: int = DEFAULT_RESOLUTION) -> float:
    """Jet length of the predicted field; direction is loop metadata, not a sign flip."""
    if direction not in ("minimize", "maximize"):
        raise SurrogateError(f"direction must be minimize or maximize, got {direction!r}")
    return jet_length(predict_field(design, model, resolution))


# ----------------------------------------------------------------------
# MCP surface


def build_surrogate_server(name: str = "rmi-surrogate",
                           model: Optional[GrowthModel] = None):
    from .mcp import McpServer

    model = model or GrowthModel()
    server = McpServer(name)

    server.register_tool(
        "get_objective",
        "Evaluate the jet-length objective for a four-value interface design.",
        {
            "type": "object",
            "properties": {
                "design": {"type": "array"},
                "direction": {"type": "string"},
                "resolution": {"type": "integer"},
            },
            "required": ["design"],
        },
        lambda args: {"objective": get_objective(
            args["design"], args.get("direction", "minimize"), model,
            args.get("resolution", DEFAULT_RESOLUTION))},
    )

    server.register_tool(
        "predict_field",
        "Predict the two-material density field for a design (row-major export).",
        {
            "type": "object",
            "properties": {
                "design": {"type": "array"},
                "resolution": {"type": "integer"},
            },
            "required": ["design"],
        },
        lambda args: predict_field(args["design"], model,
                                   args.get("resolution", DEFAULT_RESOLUTION)).to_export(),
    )

    return server
