"""Geometry agent substrate: 2D kernel with a command interpreter, topology
graph serialization, hybrid documentation retrieval, verification checks,
and a tool registry with fallback chains."""

from .model import (
    CommandSyntaxError,
    DanglingReference,
    GeoModel,
    Mesh,
    OpenLoop,
    ScriptError,
    interpret_commands,
)
from .graph import GeoGraph, InconsistentModel, build_graph, parse_graph, serialize_graph
from .retrieval import DocChunk, EmptyCorpus, Retriever, hybrid_retrieve, tokenize
from .verify import (
    DistanceExceeded,
    EmptyModel,
    TopologyMismatch,
    best_match_bijection,
    bbox_congruent,
    bounding_box,
    textual_similarity,
)
from .tools import NoToolAvailable, ToolOutcome, ToolRegistry, UnknownToolName
from .templates import build_default_corpus, instantiate_template

__all__ = [
    "CommandSyntaxError",
    "DanglingReference",
    "GeoModel",
    "Mesh",
    "OpenLoop",
    "ScriptError",
    "interpret_commands",
    "GeoGraph",
    "InconsistentModel",
    "build_graph",
    "parse_graph",
    "serialize_graph",
    "DocChunk",
    "EmptyCorpus",
    "Retriever",
    "hybrid_retrieve",
    "tokenize",
    "DistanceExceeded",
    "EmptyModel",
    "TopologyMismatch",
    "best_match_bijection",
    "bbox_congruent",
    "bounding_box",
    "textual_similarity",
    "NoToolAvailable",
    "ToolOutcome",
    "ToolRegistry",
    "UnknownToolName",
    "build_default_corpus",
    "instantiate_template",
]
