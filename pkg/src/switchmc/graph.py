"""Simplified transition graphs and the graph predicates the analysis relies on.

Nodes are state indices ``0..n-1``.  Distances are ints, with ``math.inf``
for "unreachable".
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

INF = math.inf


@dataclass(frozen=True)
class DiGraph:
    node_count: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValueError(f"edge ({i}, {j}) out of range")
        object.__setattr__(self, "edges", edges)

    @cached_property
    def successors(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(self.node_count)]
        for i, j in self.edges:
            out[i].append(j)
        return tuple(tuple(sorted(s)) for s in out)

    @cached_property
    def predecessors(self) -> tuple[tuple[int, ...], ...]:
        inc = [[] for _ in range(self.node_count)]
        for i, j in self.edges:
            inc[j].append(i)
        return tuple(tuple(sorted(p)) for p in inc)

    def __le__(self, other: "DiGraph") -> bool:
        return self.node_count == other.node_count and self.edges <= other.edges


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes, self.nodes[1:]))

    def is_valid_in(self, g: DiGraph) -> bool:
        return len(self.nodes) >= 1 and all(e in g.edges for e in self.edges())


def simplified_graph(mode) -> DiGraph:
    """Feasible transitions of a mode, self-loops dropped.

    Accepts a ``ModeSpec``, a ``Mode`` or a plain square matrix.
    """
    if hasattr(mode, "support"):
        support = np.asarray(mode.support)
    elif hasattr(mode, "spec"):
        support = np.asarray(mode.spec.support)
    else:
        support = np.asarray(mode) != 0
    n = support.shape[0]
    rows, cols = np.nonzero(support)
    return DiGraph(n, frozenset((int(i), int(j)) for i, j in zip(rows, cols) if i != j))


def mode_graphs(chain) -> tuple[DiGraph, ...]:
    chain = getattr(chain, "chain", chain)
    return tuple(simplified_graph(m) for m in chain.modes)


def _check_same_nodes(graphs: Sequence[DiGraph]) -> int:
    if not graphs:
        raise ValueError("need at least one graph")
    n = graphs[0].node_count
    if any(g.node_count != n for g in graphs):
        raise ValueError("graphs have different node counts")
    return n


def union_graph(graphs: Sequence[DiGraph]) -> DiGraph:
    n = _check_same_nodes(graphs)
    return DiGraph(n, reduce(frozenset.union, (g.edges for g in graphs)))


def intersection_graph(graphs: Sequence[DiGraph]) -> DiGraph:
    n = _check_same_nodes(graphs)
    return DiGraph(n, reduce(frozenset.intersection, (g.edges for g in graphs)))


def distances_to_set(g: DiGraph, targets: Iterable[int]) -> tuple[float, ...]:
    """Shortest edge count from every node to its nearest target (multi-source BFS on reversed edges)."""
    dist = [INF] * g.node_count
    queue = deque()
    for t in sorted(set(targets)):
        dist[t] = 0
        queue.append(t)
    while queue:
        v = queue.popleft()
        for u in g.predecessors[v]:
            if dist[u] == INF:
                dist[u] = dist[v] + 1
                queue.append(u)
    return tuple(dist)


def distance_to_set(g: DiGraph, v: int, targets: Iterable[int]) -> float:
    return distances_to_set(g, targets)[v]


def shortest_path_to_set(g: DiGraph, v: int, targets: Iterable[int]) -> Path | None:
    """Witness path from ``v`` to the target set, lowest-index successor at each tie."""
    dist = distances_to_set(g, targets)
    if dist[v] == INF:
        return None
    nodes = [v]
    while dist[nodes[-1]] > 0:
        here = nodes[-1]
        nodes.append(next(u for u in g.successors[here] if dist[u] == dist[here] - 1))
    return Path(tuple(nodes))


def max_distances_to_set(graphs: Sequence[DiGraph], targets: Iterable[int]) -> tuple[float, ...]:
    """Per-node maximum over graphs of the distance to ``targets``."""
    _check_same_nodes(graphs)
    targets = frozenset(targets)
    tables = [distances_to_set(g, targets) for g in graphs]
    return tuple(max(col) for col in zip(*tables))


def max_distance_to_set(graphs: Sequence[DiGraph], v: int, targets: Iterable[int]) -> float:
    return max_distances_to_set(graphs, targets)[v]


def sinks(g: DiGraph) -> frozenset[int]:
    return frozenset(v for v in range(g.node_count) if not g.successors[v])


def find_cycle(g: DiGraph) -> tuple[int, ...] | None:
    """Some directed cycle as a node sequence (first node not repeated), or None.

    Iterative DFS from nodes in index order, successors in index order.
    """
    WHITE, GREY, BLACK = 0, 1, 2
    color = [WHITE] * g.node_count
    for root in range(g.node_count):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(g.successors[root]))]
        on_path = [root]
        color[root] = GREY
        while stack:
            v, it = stack[-1]
            for u in it:
                if color[u] == GREY:
                    return tuple(on_path[on_path.index(u):])
                if color[u] == WHITE:
                    color[u] = GREY
                    on_path.append(u)
                    stack.append((u, iter(g.successors[u])))
                    break
            else:
                color[v] = BLACK
                on_path.pop()
                stack.pop()
    return None


def is_acyclic(g: DiGraph) -> bool:
    return find_cycle(g) is None


def is_weakly_acyclic(g: DiGraph) -> bool:
    # a graph without sinks is never weakly acyclic
    s = sinks(g)
    return bool(s) and all(d < INF for d in distances_to_set(g, s))


def reachable_from(g: DiGraph, v: int) -> frozenset[int]:
    seen = {v}
    queue = deque([v])
    while queue:
        for u in g.successors[queue.popleft()]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return frozenset(seen)


# --- export --------------------------------------------------------------

def to_edgelist(g: DiGraph, labels: Sequence[str] | None = None) -> str:
    name = (lambda i: labels[i]) if labels else str
    return "".join(f"{name(i)} {name(j)}\n" for i, j in sorted(g.edges))


def to_dot(g: DiGraph, labels: Sequence[str] | None = None, name: str = "G") -> str:
    name_of = (lambda i: labels[i]) if labels else str
    lines = [f'digraph "{name}" {{']
    lines += [f'  "{name_of(v)}";' for v in range(g.node_count)]
    lines += [f'  "{name_of(i)}" -> "{name_of(j)}";' for i, j in sorted(g.edges)]
    lines.append("}")
    return "\n".join(lines) + "\n"
