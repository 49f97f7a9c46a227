"""Decision procedures on the mode graphs.

* stabilizability of a goal set (exact: reachability on the union graph);
* equal absorbing sets across modes (necessary for absorption under
  arbitrary switching);
* three sufficient conditions for absorption under arbitrary switching.

Every check returns a certificate that can be re-verified against the
graphs without rerunning the check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .graph import (
    INF,
    distances_to_set,
    find_cycle,
    intersection_graph,
    is_acyclic,
    is_weakly_acyclic,
    max_distances_to_set,
    mode_graphs,
    shortest_path_to_set,
    sinks,
    union_graph,
)
from .model import ConcreteChain, SwitchedChain, absorbing_sets


class GoalError(ValueError):
    """Goal set violates the preconditions of the stabilizability check."""


class UnequalAbsorbingSetsError(ValueError):
    """The modes do not share one absorbing set, so A* is undefined."""


@dataclass(frozen=True)
class ConditionVerdict:
    holds: bool
    certificate: dict = field(default_factory=dict)

    def __bool__(self):
        return self.holds


def _spec_chain(chain) -> SwitchedChain:
    return chain.chain if isinstance(chain, ConcreteChain) else chain


def validate_goal(chain, goal: Iterable[int]) -> frozenset[int]:
    chain = _spec_chain(chain)
    goal = frozenset(goal)
    if not goal:
        raise GoalError("goal set is empty")
    if any(not 0 <= g < chain.n for g in goal):
        raise GoalError("goal contains an out-of-range state index")
    _, union, _ = absorbing_sets(chain)
    outside = goal - union
    if outside:
        raise GoalError(
            "goal states " + ", ".join(chain.states.names(outside)) + " are not absorbing in any mode"
        )
    return goal


def check_stabilizable(chain, goal: Iterable[int]) -> tuple[bool, tuple[float, ...]]:
    """Whether some state-feedback policy drives every state into ``goal`` almost surely.

    Returns the verdict with the union-graph distance table as certificate.
    """
    chain = _spec_chain(chain)
    goal = validate_goal(chain, goal)
    dist = distances_to_set(union_graph(mode_graphs(chain)), goal)
    return all(d < INF for d in dist), dist


def check_equal_absorbing_sets(chain) -> bool:
    per_mode, _, _ = absorbing_sets(_spec_chain(chain))
    return all(a == per_mode[0] for a in per_mode)


def common_absorbing_set(chain) -> frozenset[int]:
    chain = _spec_chain(chain)
    if not check_equal_absorbing_sets(chain):
        raise UnequalAbsorbingSetsError(
            "modes have different absorbing sets; sufficient conditions do not apply"
        )
    return chain.modes[0].absorbing


def check_condition1(chain) -> ConditionVerdict:
    """Intersection graph weakly acyclic with every sink absorbing."""
    chain = _spec_chain(chain)
    target = common_absorbing_set(chain)
    g = intersection_graph(mode_graphs(chain))
    bad_sinks = sorted(sinks(g) - target)
    if bad_sinks:
        return ConditionVerdict(False, {"reason": "sink outside absorbing set", "state": bad_sinks[0]})
    if not is_weakly_acyclic(g):
        dist = distances_to_set(g, sinks(g))
        return ConditionVerdict(
            False, {"reason": "intersection graph not weakly acyclic", "state": dist.index(INF)}
        )
    paths = {v: shortest_path_to_set(g, v, target).nodes for v in range(chain.n) if v not in target}
    return ConditionVerdict(True, {"paths": paths})


def check_condition2(chain) -> ConditionVerdict:
    """Union graph acyclic."""
    chain = _spec_chain(chain)
    common_absorbing_set(chain)
    cycle = find_cycle(union_graph(mode_graphs(chain)))
    if cycle is not None:
        return ConditionVerdict(False, {"reason": "union graph has a cycle", "cycle": cycle})
    return ConditionVerdict(True, {})


def check_condition3(chain) -> ConditionVerdict:
    """Every mode graph weakly acyclic, and in every mode each non-absorbing
    state has an edge to a state with strictly smaller max-distance."""
    chain = _spec_chain(chain)
    target = common_absorbing_set(chain)
    graphs = mode_graphs(chain)
    for i, g in enumerate(graphs):
        if not is_weakly_acyclic(g):
            dist = distances_to_set(g, sinks(g))
            state = dist.index(INF) if INF in dist else None
            return ConditionVerdict(
                False, {"reason": "mode graph not weakly acyclic", "mode": i, "state": state}
            )
    dmax = max_distances_to_set(graphs, target)
    for i, g in enumerate(graphs):
        for a in range(chain.n):
            if a in target:
                continue
            if not any(dmax[b] < dmax[a] for b in g.successors[a]):
                return ConditionVerdict(
                    False,
                    {"reason": "no strictly decreasing edge", "mode": i, "state": a, "max_distance": dmax},
                )
    return ConditionVerdict(True, {"max_distance": dmax})


def absorption_probability_lower_bound(chain: ConcreteChain, a: int) -> float:
    """Lower bound on reaching the absorbing set from ``a`` within ``|p|`` steps under any switching.

    ``p`` is the shortest intersection-graph path from ``a`` to the absorbing
    set; the bound is the smallest probability any mode gives an edge of
    ``p``, raised to the power ``|p|``.
    """
    target = common_absorbing_set(chain)
    if a in target:
        raise ValueError("state is already absorbing")
    g = intersection_graph(mode_graphs(chain))
    path = shortest_path_to_set(g, a, target)
    if path is None:
        raise ValueError(f"no intersection-graph path from state {a} to the absorbing set")
    P = chain.matrices
    smallest = min(float(P[q, i, j]) for q in range(chain.k) for i, j in path.edges())
    return smallest ** path.length


def verify_condition_certificate(chain, which: int, verdict: ConditionVerdict) -> bool:
    """Re-check a condition certificate directly against the graphs."""
    chain = _spec_chain(chain)
    target = chain.modes[0].absorbing
    graphs = mode_graphs(chain)
    cert = verdict.certificate
    if which == 1:
        g = intersection_graph(graphs)
        if verdict.holds:
            return all(
                nodes[0] == v and nodes[-1] in target
                and all(e in g.edges for e in zip(nodes, nodes[1:]))
                for v, nodes in cert["paths"].items()
            ) and set(cert["paths"]) == set(range(chain.n)) - target
        s = cert["state"]
        if cert["reason"].startswith("sink"):
            return s not in target and not g.successors[s]
        return distances_to_set(g, sinks(g))[s] == INF
    if which == 2:
        g = union_graph(graphs)
        if verdict.holds:
            return is_acyclic(g)
        c = cert["cycle"]
        return all(e in g.edges for e in zip(c, c[1:] + c[:1]))
    if which == 3:
        if verdict.holds:
            d = cert["max_distance"]
            return all(
                any(d[b] < d[a] for b in g.successors[a])
                for g in graphs for a in range(chain.n) if a not in target
            )
        g = graphs[cert["mode"]]
        if cert["reason"].startswith("mode graph"):
            return not is_weakly_acyclic(g)
        d, a = cert["max_distance"], cert["state"]
        return a not in target and all(d[b] >= d[a] for b in g.successors[a])
    raise ValueError("condition number must be 1, 2 or 3")
