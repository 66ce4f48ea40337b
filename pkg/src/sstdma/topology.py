"""Interference graphs: construction, validation, (de)serialization.

A graph is a symmetric relation over node indices ``0..N-1``; node ``i``'s
extended neighborhood is ``adjacency[i]``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np
from scipy.spatial import cKDTree


class GraphFormatError(ValueError):
    """Raised when a graph document or edge list is malformed."""


@dataclass(frozen=True)
class InterferenceGraph:
    node_count: int
    adjacency: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError(f"node_count must be positive, got {self.node_count}")
        if len(self.adjacency) != self.node_count:
            raise ValueError("adjacency must have one entry per node")
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if not 0 <= j < self.node_count:
                    raise GraphFormatError(f"node {i} has out-of-range neighbor {j}")
                if j == i:
                    raise GraphFormatError(f"self-loop at node {i}")
                if i not in self.adjacency[j]:
                    raise GraphFormatError(f"asymmetric edge {i}->{j}")

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "InterferenceGraph":
        adj: list[set[int]] = [set() for _ in range(node_count)]
        for i, j in edges:
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise GraphFormatError(f"edge ({i}, {j}) out of range for N={node_count}")
            if i == j:
                raise GraphFormatError(f"self-loop at node {i}")
            adj[i].add(j)
            adj[j].add(i)
        return cls(node_count, tuple(frozenset(s) for s in adj))

    def edges(self) -> Iterator[tuple[int, int]]:
        """Undirected edges in canonical ``i < j`` order."""
        for i, nbrs in enumerate(self.adjacency):
            for j in sorted(nbrs):
                if i < j:
                    yield i, j

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    @property
    def degrees(self) -> list[int]:
        return [len(n) for n in self.adjacency]

    def to_document(self) -> dict:
        return {"node_count": self.node_count, "edges": [list(e) for e in self.edges()]}


@dataclass(frozen=True)
class GraphStats:
    edge_count: int
    mean_degree: float
    max_degree: int


def graph_stats(g: InterferenceGraph) -> GraphStats:
    degrees = g.degrees
    total = sum(degrees)
    return GraphStats(edge_count=total // 2, mean_degree=total / g.node_count, max_degree=max(degrees))


def generate_rgg(n_nodes: int, interference_range: float, seed: int | None = None) -> InterferenceGraph:
    """Random geometric graph on the unit square (no wraparound).

    Nodes are placed i.i.d. uniformly; ``i`` and ``j`` interfere iff their
    Euclidean distance is strictly below ``interference_range``.
    """
    if n_nodes < 1:
        raise ValueError(f"n_nodes must be >= 1, got {n_nodes}")
    if not 0 < interference_range <= math.sqrt(2):
        raise ValueError(f"interference_range must be in (0, sqrt(2)], got {interference_range}")
    rng = np.random.default_rng(seed)
    pos = rng.random((n_nodes, 2))
    pairs = cKDTree(pos).query_pairs(interference_range, output_type="ndarray")
    if len(pairs):
        # query_pairs is inclusive; ties at exactly the range are dropped
        dist = np.linalg.norm(pos[pairs[:, 0]] - pos[pairs[:, 1]], axis=1)
        pairs = pairs[dist < interference_range]
    return InterferenceGraph.from_edges(n_nodes, map(tuple, pairs.tolist()))


def fig4_range(n_nodes: int, base: float = 0.1, base_nodes: int = 500) -> float:
    """Range keeping the mean extended degree constant as N grows."""
    if n_nodes < 1:
        raise ValueError(f"n_nodes must be positive, got {n_nodes}")
    return base / math.sqrt(n_nodes / base_nodes)


def load_graph(source: Mapping | str) -> InterferenceGraph:
    """Build a graph from a ``{"node_count": N, "edges": [[i, j], ...]}`` document.

    ``source`` may be the parsed mapping or its JSON text. Duplicate edges
    (in either orientation) are dropped with a warning.
    """
    doc = json.loads(source) if isinstance(source, str) else source
    try:
        n = doc["node_count"]
        raw_edges = doc["edges"]
    except (KeyError, TypeError) as exc:
        raise GraphFormatError(f"graph document needs node_count and edges: {exc}") from None
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise GraphFormatError(f"node_count must be a positive integer, got {n!r}")
    seen: set[tuple[int, int]] = set()
    edges = []
    for e in raw_edges:
        if len(e) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in e):
            raise GraphFormatError(f"malformed edge {e!r}")
        i, j = e
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"edge {e!r} index out of range for N={n}")
        if i == j:
            raise GraphFormatError(f"self-loop at node {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            warnings.warn(f"duplicate edge {e!r} ignored", stacklevel=2)
            continue
        seen.add(key)
        edges.append(key)
    return InterferenceGraph.from_edges(n, edges)


def dump_graph(g: InterferenceGraph) -> str:
    return json.dumps(g.to_document())


def complete_graph(n: int) -> InterferenceGraph:
    return InterferenceGraph.from_edges(n, ((i, j) for i in range(n) for j in range(i + 1, n)))


def path_graph(n: int) -> InterferenceGraph:
    return InterferenceGraph.from_edges(n, ((i, i + 1) for i in range(n - 1)))


def empty_graph(n: int) -> InterferenceGraph:
    return InterferenceGraph.from_edges(n, ())
