"""Geometry tools exposed over the agent RPC runtime."""

from __future__ import annotations

from ..mcp.server import McpServer, ToolError
from .graph import build_graph, serialize_graph
from .model import ScriptError, interpret_commands
from .retrieval import DocChunk, EmptyCorpus, Retriever
from .templates import build_default_corpus
from .verify import (
    DistanceExceeded,
    EmptyModel,
    TopologyMismatch,
    bbox_congruent,
    best_match_bijection,
    textual_similarity,
)


def _interpret(script: str):
    try:
        return interpret_commands(script)
    except ScriptError as exc:
        raise ToolError(str(exc), details={
            "line": exc.line,
            "kind": type(exc).__name__,
        }) from exc


def build_geometry_server(corpus: list[DocChunk] | None = None) -> McpServer:
    server = McpServer(name="geometry-kit", version="1.0.0")
    retriever = Retriever(corpus if corpus is not None else build_default_corpus())

    def interpret_tool(args):
        model = _interpret(args["script"])
        return {
            "vertices": len(model.vertices),
            "curves": len(model.curves),
            "surfaces": len(model.surfaces),
            "meshed_surfaces": sorted(model.meshes),
        }

    server.register_tool(
        "interpret_commands",
        "Run a geometry command script and report entity counts.",
        {
            "type": "object",
            "properties": {"script": {"type": "string"}},
            "required": ["script"],
        },
        interpret_tool,
    )

    def serialize_tool(args):
        model = _interpret(args["script"])
        return {"graph": serialize_graph(build_graph(model))}

    server.register_tool(
        "serialize_graph",
        "Interpret a script and serialize its topology graph as text.",
        {
            "type": "object",
            "properties": {"script": {"type": "string"}},
            "required": ["script"],
        },
        serialize_tool,
    )

    def retrieve_tool(args):
        k = int(args.get("k", 3))
        try:
            hits = retriever.retrieve(args["query"], k)
        except (EmptyCorpus, ValueError) as exc:
            raise ToolError(str(exc)) from exc
        return {
            "hits": [
                {
                    "id": h.chunk.id,
                    "score": h.score,
                    "function_names": h.chunk.function_names,
                    "text": h.chunk.text,
                }
                for h in hits
            ]
        }

    server.register_tool(
        "hybrid_retrieve",
        "Retrieve the top-k documentation chunks for a query.",
        {
            "type": "object",
            "properties": {"query": {"type": "string"}, "k": {"type": "integer"}},
            "required": ["query"],
        },
        retrieve_tool,
    )

    def verify_tool(args):
        candidate = _interpret(args["candidate"])
        reference = _interpret(args["reference"])
        tol = float(args.get("tol", 1e-6))
        max_dist = float(args.get("max_dist", 1e-6))
        report: dict = {}
        try:
            report["bbox_ok"] = bbox_congruent(candidate, reference, tol)
        except EmptyModel as exc:
            raise ToolError(str(exc)) from exc
        try:
            match = best_match_bijection(reference, candidate, max_dist)
            report["bijection_ok"] = True
            report["max_distance"] = match.max_distance
        except (TopologyMismatch, DistanceExceeded) as exc:
            report["bijection_ok"] = False
            report["bijection_error"] = str(exc)
        report["textual"] = textual_similarity(args["candidate"], args["reference"])
        report["ok"] = bool(report["bbox_ok"] and report["bijection_ok"])
        return report

    server.register_tool(
        "verify_geometry",
        "Compare a candidate script against a reference: bounding box, "
        "vertex bijection, and token similarity.",
        {
            "type": "object",
            "properties": {
                "candidate": {"type": "string"},
                "reference": {"type": "string"},
                "tol": {"type": "number"},
                "max_dist": {"type": "number"},
            },
            "required": ["candidate", "reference"],
        },
        verify_tool,
    )

    return server
