"""Self-stabilizing TDMA slot allocation: protocol, simulator and convergence bounds."""

from .protocol import FrameConfig, NodeState, RelativeState, relative_state
from .simulator import FaultKind, RunResult, World, inject_fault, is_safe, make_world, run_round, run_until_safe
from .topology import InterferenceGraph, generate_rgg, graph_stats, load_graph

__all__ = [
    "FaultKind",
    "FrameConfig",
    "InterferenceGraph",
    "NodeState",
    "RelativeState",
    "RunResult",
    "World",
    "generate_rgg",
    "graph_stats",
    "inject_fault",
    "is_safe",
    "load_graph",
    "make_world",
    "relative_state",
    "run_round",
    "run_until_safe",
]
