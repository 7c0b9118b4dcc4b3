"""Incremental, parameterized structural graph summaries."""

from .engine import RunConfig, batch, summarize
from .graph import ChangeSet, GraphBuilder, GraphDatabase, NamedGraph, apply_changes
from .model import (build_vertex_summary, model_attribute_collection, model_by_name,
                    model_class_collection, model_schemex)
from .summary_graph import SummaryGraph
from .vhi import VertexUpdateHashIndex

__all__ = [
    "ChangeSet", "GraphBuilder", "GraphDatabase", "NamedGraph", "RunConfig", "SummaryGraph",
    "VertexUpdateHashIndex", "apply_changes", "batch", "build_vertex_summary",
    "model_attribute_collection", "model_by_name", "model_class_collection", "model_schemex",
    "summarize",
]
__version__ = "0.1.0"
