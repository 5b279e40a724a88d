"""Topology graph over a geometry model, with a stable text serialization.

The serialized form sorts entities by (type, id), writes reals with six
decimals, and sorts id lists ascending, so equal graphs serialize to
byte-identical text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .model import GeoModel


class InconsistentModel(Exception):
    """The model references entities that are missing or malformed."""


@dataclass
class VertexNode:
    id: int
    coords: tuple[float, float]
    edge_ids: list[int] = field(default_factory=list)


@dataclass
class EdgeNode:
    id: int
    length: float
    centroid: tuple[float, float]
    intervals: int
    vertex_ids: list[int] = field(default_factory=list)
    surface_ids: list[int] = field(default_factory=list)


@dataclass
class SurfaceNode:
    id: int
    centroid: tuple[float, float]
    area: float
    normal: tuple[int, int, int]
    mesh_size: float
    edge_ids: list[int] = field(default_factory=list)


@dataclass
class GeoGraph:
    vertices: dict[int, VertexNode] = field(default_factory=dict)
    edges: dict[int, EdgeNode] = field(default_factory=dict)
    surfaces: dict[int, SurfaceNode] = field(default_factory=dict)


def build_graph(model: GeoModel) -> GeoGraph:
    """Derive the incidence graph: vertex-edge and edge-surface links mirror
    the model's references exactly.

    mesh_size is the mean boundary edge length divided by the interval
    count, 0.0 for unmeshed surfaces.
    """
    graph = GeoGraph()
    for vid, (x, y) in model.vertices.items():
        graph.vertices[vid] = VertexNode(id=vid, coords=(x, y))
    for cid, curve in model.curves.items():
        for vid in (curve.v1, curve.v2):
            if vid not in graph.vertices:
                raise InconsistentModel(f"curve {cid} references missing vertex {vid}")
        (x1, y1) = model.vertices[curve.v1]
        (x2, y2) = model.vertices[curve.v2]
        edge = EdgeNode(
            id=cid,
            length=math.hypot(x2 - x1, y2 - y1),
            centroid=((x1 + x2) / 2.0, (y1 + y2) / 2.0),
            intervals=curve.intervals,
            vertex_ids=sorted((curve.v1, curve.v2)),
        )
        graph.edges[cid] = edge
        graph.vertices[curve.v1].edge_ids.append(cid)
        graph.vertices[curve.v2].edge_ids.append(cid)
    for sid, surface in model.surfaces.items():
        lengths = []
        for cid in surface.curve_ids:
            if cid not in graph.edges:
                raise InconsistentModel(f"surface {sid} references missing curve {cid}")
            graph.edges[cid].surface_ids.append(sid)
            lengths.append(graph.edges[cid].length)
        mesh = model.meshes.get(sid)
        mesh_size = (sum(lengths) / len(lengths)) / mesh.intervals if mesh else 0.0
        graph.surfaces[sid] = SurfaceNode(
            id=sid,
            centroid=surface.centroid,
            area=surface.area,
            normal=(0, 0, 1),
            mesh_size=mesh_size,
            edge_ids=sorted(surface.curve_ids),
        )
    for node in graph.vertices.values():
        node.edge_ids.sort()
    for edge in graph.edges.values():
        edge.surface_ids.sort()
    return graph


def _fmt(x: float) -> str:
    # Normalize negative zero so serialization is a pure function of value.
    v = round(float(x), 6) + 0.0
    return f"{v:.6f}"


def _ids(ids: list[int]) -> str:
    return "[" + ",".join(str(i) for i in sorted(ids)) + "]"


def serialize_graph(graph: GeoGraph) -> str:
    """Render the graph as text, one entity per line, sorted by (type, id)."""
    lines: list[str] = []
    records: list[tuple[str, int, str]] = []
    for eid in sorted(graph.edges):
        e = graph.edges[eid]
        records.append((
            "EDGE", eid,
            f"EDGE {eid} length={_fmt(e.length)} "
            f"centroid=({_fmt(e.centroid[0])},{_fmt(e.centroid[1])}) "
            f"intervals={e.intervals} vertices={_ids(e.vertex_ids)} "
            f"surfaces={_ids(e.surface_ids)}",
        ))
    for sid in sorted(graph.surfaces):
        s = graph.surfaces[sid]
        records.append((
            "SURFACE", sid,
            f"SURFACE {sid} centroid=({_fmt(s.centroid[0])},{_fmt(s.centroid[1])}) "
            f"area={_fmt(s.area)} normal=(0,0,1) mesh_size={_fmt(s.mesh_size)} "
            f"edges={_ids(s.edge_ids)}",
        ))
    for vid in sorted(graph.vertices):
        v = graph.vertices[vid]
        records.append((
            "VERTEX", vid,
            f"VERTEX {vid} coords=({_fmt(v.coords[0])},{_fmt(v.coords[1])}) "
            f"edges={_ids(v.edge_ids)}",
        ))
    records.sort(key=lambda r: (r[0], r[1]))
    lines = [r[2] for r in records]
    return "\n".join(lines) + "\n"


_PAIR_RE = re.compile(r"^\(([^,()]+),([^,()]+)\)$")
_LIST_RE = re.compile(r"^\[([0-9,]*)\]$")


def _parse_fields(parts: list[str], line: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for part in parts:
        key, sep, value = part.partition("=")
        if not sep:
            raise InconsistentModel(f"malformed field {part!r} in line {line!r}")
        fields[key] = value
    return fields


def _parse_pair(value: str, line: str) -> tuple[float, float]:
    m = _PAIR_RE.match(value)
    if not m:
        raise InconsistentModel(f"malformed pair {value!r} in line {line!r}")
    return (float(m.group(1)), float(m.group(2)))


def _parse_ids(value: str, line: str) -> list[int]:
    m = _LIST_RE.match(value)
    if m is None:
        raise InconsistentModel(f"malformed id list {value!r} in line {line!r}")
    body = m.group(1)
    return [int(tok) for tok in body.split(",") if tok]


def parse_graph(text: str) -> GeoGraph:
    """Inverse of serialize_graph for well-formed serializations."""
    graph = GeoGraph()
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if len(parts) < 2:
            raise InconsistentModel(f"truncated line {line!r}")
        try:
            eid = int(parts[1])
        except ValueError:
            raise InconsistentModel(f"bad entity id in line {line!r}") from None
        fields = _parse_fields(parts[2:], line)
        try:
            if kind == "VERTEX":
                graph.vertices[eid] = VertexNode(
                    id=eid,
                    coords=_parse_pair(fields["coords"], line),
                    edge_ids=_parse_ids(fields["edges"], line),
                )
            elif kind == "EDGE":
                graph.edges[eid] = EdgeNode(
                    id=eid,
                    length=float(fields["length"]),
                    centroid=_parse_pair(fields["centroid"], line),
                    intervals=int(fields["intervals"]),
                    vertex_ids=_parse_ids(fields["vertices"], line),
                    surface_ids=_parse_ids(fields["surfaces"], line),
                )
            elif kind == "SURFACE":
                if fields["normal"] != "(0,0,1)":
                    raise InconsistentModel(f"unsupported normal in line {line!r}")
                graph.surfaces[eid] = SurfaceNode(
                    id=eid,
                    centroid=_parse_pair(fields["centroid"], line),
                    area=float(fields["area"]),
                    normal=(0, 0, 1),
                    mesh_size=float(fields["mesh_size"]),
                    edge_ids=_parse_ids(fields["edges"], line),
                )
            else:
                raise InconsistentModel(f"unknown entity type {kind!r}")
        except KeyError as exc:
            raise InconsistentModel(f"missing field {exc} in line {line!r}") from None
    return graph
