"""Minimal 2D geometry kernel driven by a line-oriented command language.

Supported commands (one per line, "#" starts a comment):

    create vertex <x> <y>
    create curve <v1> <v2>
    create surface <c1> <c2> ... <ck>
    mesh surface <s> intervals <n>

Entity ids are assigned sequentially per type, starting at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ScriptError(Exception):
    """Base for interpreter failures; carries the 1-based source line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message


class CommandSyntaxError(ScriptError):
    """Malformed command: unknown verb, wrong arity, or a bad literal."""

    def __init__(self, line: int, token: str, message: str):
        super().__init__(line, message)
        self.token = token


class DanglingReference(ScriptError):
    """A command referenced an entity id that does not exist."""

    def __init__(self, line: int, entity_id: int, message: str):
        super().__init__(line, message)
        self.entity_id = entity_id


class OpenLoop(ScriptError):
    """Surface boundary curves could not be chained into a closed loop."""


@dataclass
class Curve:
    id: int
    v1: int
    v2: int
    intervals: int = 0


@dataclass
class Surface:
    id: int
    curve_ids: list[int]
    # Boundary vertices in cycle order, counterclockwise (positive area).
    loop_vertices: list[int]
    area: float
    centroid: tuple[float, float]


@dataclass
class Mesh:
    surface_id: int
    intervals: int
    nodes: list[tuple[float, float]]
    # Quads as 4-tuples of 1-based node ids, counterclockwise.
    elements: list[tuple[int, int, int, int]]


@dataclass
class GeoModel:
    vertices: dict[int, tuple[float, float]] = field(default_factory=dict)
    curves: dict[int, Curve] = field(default_factory=dict)
    surfaces: dict[int, Surface] = field(default_factory=dict)
    meshes: dict[int, Mesh] = field(default_factory=dict)

    def add_vertex(self, x: float, y: float) -> int:
        vid = len(self.vertices) + 1
        self.vertices[vid] = (float(x), float(y))
        return vid

    def curve_length(self, cid: int) -> float:
        c = self.curves[cid]
        (x1, y1), (x2, y2) = self.vertices[c.v1], self.vertices[c.v2]
        return math.hypot(x2 - x1, y2 - y1)


def _chain_loop(model: GeoModel, curve_ids: list[int], line: int) -> list[int]:
    """Order the curves into one closed loop and return the vertex cycle.

    Each curve must be used exactly once and consecutive curves must share
    an endpoint; the walk must return to its starting vertex.
    """
    first = model.curves[curve_ids[0]]
    remaining = set(curve_ids[1:])
    cycle = [first.v1, first.v2]
    while remaining:
        tail = cycle[-1]
        step = None
        for cid in remaining:
            c = model.curves[cid]
            if c.v1 == tail:
                step = (cid, c.v2)
                break
            if c.v2 == tail:
                step = (cid, c.v1)
                break
        if step is None:
            raise OpenLoop(line, "surface boundary does not form a closed loop")
        remaining.discard(step[0])
        cycle.append(step[1])
    if cycle[-1] != cycle[0] or len(cycle) != len(curve_ids) + 1:
        raise OpenLoop(line, "surface boundary does not form a closed loop")
    return cycle[:-1]


def _polygon_area_centroid(points: list[tuple[float, float]]) -> tuple[float, tuple[float, float]]:
    """Signed shoelace area and area centroid of a simple polygon."""
    n = len(points)
    twice_area = 0.0
    cx = 0.0
    cy = 0.0
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        cross = x1 * y2 - x2 * y1
        twice_area += cross
        cx += (x1 + x2) * cross
        cy += (y1 + y2) * cross
    area = 0.5 * twice_area
    if area == 0.0:
        raise ValueError("degenerate polygon with zero area")
    return area, (cx / (6.0 * area), cy / (6.0 * area))


def _transfinite_quad(model: GeoModel, surface: Surface, n: int) -> Mesh:
    """Structured quad mesh on a 4-sided loop: (n+1)^2 nodes, n^2 elements.

    Nodes are numbered row-major, 1-based; element corners run
    counterclockwise to match the loop orientation.
    """
    corners = [model.vertices[v] for v in surface.loop_vertices]
    p00, p10, p11, p01 = corners
    nodes: list[tuple[float, float]] = []
    for j in range(n + 1):
        v = j / n
        for i in range(n + 1):
            u = i / n
            x = (1 - u) * (1 - v) * p00[0] + u * (1 - v) * p10[0] + u * v * p11[0] + (1 - u) * v * p01[0]
            y = (1 - u) * (1 - v) * p00[1] + u * (1 - v) * p10[1] + u * v * p11[1] + (1 - u) * v * p01[1]
            nodes.append((x, y))
    elements: list[tuple[int, int, int, int]] = []
    stride = n + 1
    for j in range(n):
        for i in range(n):
            a = j * stride + i + 1
            elements.append((a, a + 1, a + 1 + stride, a + stride))
    return Mesh(surface_id=surface.id, intervals=n, nodes=nodes, elements=elements)


def _parse_float(token: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise CommandSyntaxError(line, token, f"expected a number, got {token!r}") from None


def _parse_id(token: str, line: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise CommandSyntaxError(line, token, f"expected an entity id, got {token!r}") from None
    if value < 1:
        raise CommandSyntaxError(line, token, f"entity ids are positive, got {value}")
    return value


def interpret_commands(script: str, model: GeoModel | None = None) -> GeoModel:
    """Execute a command script against a fresh (or given) model.

    Raises CommandSyntaxError, DanglingReference, or OpenLoop with the
    offending 1-based line number.
    """
    model = model if model is not None else GeoModel()
    for lineno, raw in enumerate(script.splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        verb = parts[0].lower()
        if verb == "create":
            if len(parts) < 2:
                raise CommandSyntaxError(lineno, verb, "create requires an entity kind")
            kind = parts[1].lower()
            args = parts[2:]
            if kind == "vertex":
                if len(args) != 2:
                    raise CommandSyntaxError(lineno, kind, "create vertex takes exactly x y")
                model.add_vertex(_parse_float(args[0], lineno), _parse_float(args[1], lineno))
            elif kind == "curve":
                if len(args) != 2:
                    raise CommandSyntaxError(lineno, kind, "create curve takes exactly two vertex ids")
                v1 = _parse_id(args[0], lineno)
                v2 = _parse_id(args[1], lineno)
                for vid in (v1, v2):
                    if vid not in model.vertices:
                        raise DanglingReference(lineno, vid, f"vertex {vid} does not exist")
                if v1 == v2:
                    raise CommandSyntaxError(lineno, args[1], "curve endpoints must be distinct")
                cid = len(model.curves) + 1
                model.curves[cid] = Curve(id=cid, v1=v1, v2=v2)
            elif kind == "surface":
                if not args:
                    raise CommandSyntaxError(lineno, kind, "create surface needs at least one curve id")
                curve_ids = [_parse_id(a, lineno) for a in args]
                for cid in curve_ids:
                    if cid not in model.curves:
                        raise DanglingReference(lineno, cid, f"curve {cid} does not exist")
                if len(set(curve_ids)) != len(curve_ids):
                    raise CommandSyntaxError(lineno, kind, "surface repeats a boundary curve")
                if len(curve_ids) < 3:
                    raise OpenLoop(lineno, "surface boundary does not form a closed loop")
                cycle = _chain_loop(model, curve_ids, lineno)
                points = [model.vertices[v] for v in cycle]
                try:
                    area, centroid = _polygon_area_centroid(points)
                except ValueError:
                    raise OpenLoop(lineno, "surface boundary encloses no area") from None
                if area < 0:
                    cycle.reverse()
                    area = -area
                sid = len(model.surfaces) + 1
                model.surfaces[sid] = Surface(
                    id=sid, curve_ids=list(curve_ids), loop_vertices=cycle,
                    area=area, centroid=centroid,
                )
            else:
                raise CommandSyntaxError(lineno, kind, f"unknown entity kind {kind!r}")
        elif verb == "mesh":
            if len(parts) != 5 or parts[1].lower() != "surface" or parts[3].lower() != "intervals":
                raise CommandSyntaxError(lineno, verb, "usage: mesh surface <id> intervals <n>")
            sid = _parse_id(parts[2], lineno)
            if sid not in model.surfaces:
                raise DanglingReference(lineno, sid, f"surface {sid} does not exist")
            n = _parse_id(parts[4], lineno)
            surface = model.surfaces[sid]
            if len(surface.curve_ids) != 4:
                raise CommandSyntaxError(
                    lineno, parts[2], "structured meshing needs a 4-curve boundary"
                )
            model.meshes[sid] = _transfinite_quad(model, surface, n)
            for cid in surface.curve_ids:
                model.curves[cid].intervals = n
        else:
            raise CommandSyntaxError(lineno, verb, f"unknown command {verb!r}")
    return model
