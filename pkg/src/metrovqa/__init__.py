"""Neuro-symbolic question answering over rendered transit-network maps."""

from metrovqa.graph import Edge, GraphError, Line, Station, TransitGraph, load_graph, save_graph
from metrovqa.nlq.templates import parse_question_regex
from metrovqa.program import Answer, FunctionalProgram, grade, parse_program
from metrovqa.reasoner import evaluate, evaluate_trace

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "Edge",
    "FunctionalProgram",
    "GraphError",
    "Line",
    "Station",
    "TransitGraph",
    "evaluate",
    "evaluate_trace",
    "grade",
    "load_graph",
    "parse_program",
    "parse_question_regex",
    "save_graph",
]
