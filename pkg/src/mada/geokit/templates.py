"""Documentation corpus for the geometry command language, plus script
templates that a retrieval hit can instantiate.

Generation here is deliberately mechanical: the top retrieved chunk names a
template, and the template expands to a command script with the requested
parameters filled in.
"""

from __future__ import annotations

from .retrieval import DocChunk


def rectangle_script(width: float, height: float, intervals: int | None = None,
                     x0: float = 0.0, y0: float = 0.0) -> str:
    lines = [
        "# rectangle plate",
        f"create vertex {x0} {y0}",
        f"create vertex {x0 + width} {y0}",
        f"create vertex {x0 + width} {y0 + height}",
        f"create vertex {x0} {y0 + height}",
        "create curve 1 2",
        "create curve 2 3",
        "create curve 3 4",
        "create curve 4 1",
        "create surface 1 2 3 4",
    ]
    if intervals is not None:
        lines.append(f"mesh surface 1 intervals {intervals}")
    return "\n".join(lines) + "\n"


def unit_square_script(intervals: int | None = 4) -> str:
    return rectangle_script(1.0, 1.0, intervals=intervals)


def triangle_script(p1=(0.0, 0.0), p2=(1.0, 0.0), p3=(0.0, 1.0)) -> str:
    lines = [
        "# triangular patch",
        f"create vertex {p1[0]} {p1[1]}",
        f"create vertex {p2[0]} {p2[1]}",
        f"create vertex {p3[0]} {p3[1]}",
        "create curve 1 2",
        "create curve 2 3",
        "create curve 3 1",
        "create surface 1 2 3",
    ]
    return "\n".join(lines) + "\n"


_TEMPLATES = {
    "rectangle_script": rectangle_script,
    "unit_square_script": unit_square_script,
    "triangle_script": triangle_script,
}


def instantiate_template(name: str, **params) -> str:
    """Expand a named template into a command script."""
    if name not in _TEMPLATES:
        raise KeyError(f"unknown template {name!r}")
    return _TEMPLATES[name](**params)


def build_default_corpus() -> list[DocChunk]:
    """Chunks covering each command plus the script templates; ids are
    stable so retrieval results are reproducible."""
    return [
        DocChunk(1, ["create vertex"],
                 "Create a point at coordinates x y. Vertices are numbered from 1 "
                 "in creation order. Usage: create vertex 0.0 1.5"),
        DocChunk(2, ["create curve"],
                 "Create a straight curve between two existing vertices. Endpoints "
                 "must be distinct. Usage: create curve 1 2"),
        DocChunk(3, ["create surface"],
                 "Create a surface bounded by curves that chain into a single "
                 "closed loop. Usage: create surface 1 2 3 4"),
        DocChunk(4, ["mesh surface"],
                 "Mesh a four-sided surface with a structured quad grid. The "
                 "interval count n gives (n+1)^2 nodes and n^2 elements. "
                 "Usage: mesh surface 1 intervals 4"),
        DocChunk(5, ["rectangle_script", "create surface"],
                 "Template for an axis-aligned rectangle plate: four vertices, "
                 "four curves, one surface, optional structured mesh. "
                 "Usage: rectangle plate width 2 height 1 intervals 8"),
        DocChunk(6, ["unit_square_script", "mesh surface"],
                 "Template for the unit square benchmark plate with a structured "
                 "mesh, area 1. Usage: unit square intervals 4"),
        DocChunk(7, ["triangle_script"],
                 "Template for a triangular patch bounded by three curves. "
                 "Usage: triangle patch corners (0,0) (1,0) (0,1)"),
        DocChunk(8, ["serialize_graph"],
                 "Serialize the topology graph of a model: vertices, edges and "
                 "surfaces with lengths, centroids, areas and incidence lists."),
    ]


def script_for_query(query: str, corpus: list[DocChunk] | None = None, **params) -> tuple[str, DocChunk]:
    """Retrieve the best-matching chunk and, when it names a template,
    instantiate it.  Returns (script, chunk)."""
    from .retrieval import hybrid_retrieve

    chunks = corpus if corpus is not None else build_default_corpus()
    top = hybrid_retrieve(query, chunks, 1)[0].chunk
    for fn in top.function_names:
        if fn in _TEMPLATES:
            return _TEMPLATES[fn](**params), top
    raise KeyError(f"top chunk {top.id} names no template: {top.function_names}")
