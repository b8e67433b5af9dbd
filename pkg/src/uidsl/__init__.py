"""A JSON UI description language with streaming parsing, HTML rendering,
training-data preparation and evaluation metrics."""

from .binding import BindPolicy, BindingError, bind_tree, resolve
from .datapath import DataPath, PathSyntaxError, parse_path
from .dsl import (
    BindType,
    DslError,
    DslNode,
    NodeType,
    ParamValue,
    ValidationReport,
    Violation,
    parse_document,
    serialize,
    validate,
)
from .render import RenderOutput, check_renderable, render, render_stream
from .stream import PartialTree, StreamParser, iter_snapshots

__version__ = "0.1.0"

__all__ = [
    "BindPolicy",
    "BindType",
    "BindingError",
    "DataPath",
    "DslError",
    "DslNode",
    "NodeType",
    "ParamValue",
    "PartialTree",
    "PathSyntaxError",
    "RenderOutput",
    "StreamParser",
    "ValidationReport",
    "Violation",
    "bind_tree",
    "check_renderable",
    "iter_snapshots",
    "parse_document",
    "parse_path",
    "render",
    "render_stream",
    "resolve",
    "serialize",
    "validate",
]
