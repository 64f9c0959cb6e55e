"""Deep graph generators learned from construction sequences."""

from .graph import Graph, are_isomorphic, connected_components, read_graphs, write_graphs
from .sequences import (
    AddEdge,
    AddNode,
    ConstructionSequence,
    InvalidSequence,
    RemoveNode,
    extract_traversal,
    read_sequences,
    replay,
    validate,
    write_sequences,
)
from .generators import ModelSpec, generate_ba, generate_er, generate_ws
from .model import HyperParams, Memory, ModelParams, sample_graph, teacher_forced_loss

__version__ = "0.1.0"
