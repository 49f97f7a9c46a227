"""State-feedback switching policies: synthesis, induced chains, absorption quantities."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .analysis import _spec_chain, check_stabilizable
from .graph import INF, DiGraph, distances_to_set, simplified_graph
from .model import ConcreteChain, ModelError, StateSpace

RESIDUAL_TOL = 1e-10
VALUE_ITERATION_TOL = 1e-12


class UnstabilizableError(ValueError):
    def __init__(self, unreachable: Sequence[int], labels: Sequence[str] | None = None):
        self.unreachable = tuple(unreachable)
        names = [labels[i] for i in unreachable] if labels else [str(i) for i in unreachable]
        super().__init__("goal unreachable on the union graph from " + ", ".join(names))


class NotAbsorbingError(ValueError):
    """Some state cannot reach the target set in the induced chain."""


@dataclass(frozen=True)
class SwitchingPolicy:
    """Mode choice per state, 0-based.

    ``targets`` (optional) records, per state, the closer state that the
    chosen mode can move to; ``None`` for goal states.
    """

    modes: tuple[int, ...]
    targets: tuple[int | None, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if any(m < 0 for m in self.modes):
            raise ValueError("mode indices must be non-negative")

    @classmethod
    def from_one_based(cls, modes: Iterable[int]) -> "SwitchingPolicy":
        return cls(tuple(int(m) - 1 for m in modes))

    def one_based(self) -> tuple[int, ...]:
        return tuple(m + 1 for m in self.modes)

    def check(self, n: int, k: int) -> None:
        if len(self.modes) != n:
            raise ValueError(f"policy covers {len(self.modes)} states, model has {n}")
        if any(m >= k for m in self.modes):
            raise ValueError(f"policy uses a mode index above {k}")


@dataclass(frozen=True, eq=False)
class InducedChain:
    """Time-invariant chain obtained by fixing a policy: row ``i`` comes from mode ``policy[i]``."""

    matrix: np.ndarray
    policy: SwitchingPolicy

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def closer_set(chain, goal: Iterable[int], a: int) -> frozenset[int]:
    """States strictly closer to ``goal`` than ``a`` on the union graph."""
    _, dist = check_stabilizable(chain, goal)
    return frozenset(j for j, d in enumerate(dist) if d < dist[a])


def _tie_breaker(tie_break: str):
    if tie_break == "lowest":
        return lambda options: options[0]
    m = re.fullmatch(r"seeded:(\d+)", tie_break)
    if not m:
        raise ValueError(f"unknown tie-break rule {tie_break!r}")
    rng = np.random.default_rng(int(m.group(1)))
    return lambda options: options[int(rng.integers(len(options)))]


def synthesize_policy(chain, goal: Iterable[int], tie_break: str = "lowest") -> SwitchingPolicy:
    """Build a policy that reaches ``goal`` almost surely.

    Each non-goal state gets a mode with a feasible move to a strictly closer
    state (union-graph distance); each goal state gets a mode in which it is
    absorbing.  ``tie_break`` is ``"lowest"`` or ``"seeded:<int>"``.
    """
    chain = _spec_chain(chain)
    goal = frozenset(goal)
    ok, dist = check_stabilizable(chain, goal)
    if not ok:
        raise UnstabilizableError([i for i, d in enumerate(dist) if d == INF], chain.states.labels)
    pick = _tie_breaker(tie_break)
    modes, targets = [], []
    for a in range(chain.n):
        if a in goal:
            options = [s for s, m in enumerate(chain.modes) if a in m.absorbing]
            modes.append(pick(options))
            targets.append(None)
            continue
        closer = sorted((j for j in range(chain.n) if dist[j] < dist[a]), key=lambda j: (dist[j], j))
        options = [s for s, m in enumerate(chain.modes) if any(m.support[a, j] for j in closer)]
        s = pick(options)
        modes.append(s)
        targets.append(next(j for j in closer if chain.modes[s].support[a, j]))
    return SwitchingPolicy(tuple(modes), tuple(targets))


def induced_graph(chain, policy: SwitchingPolicy) -> DiGraph:
    chain = _spec_chain(chain)
    policy.check(chain.n, chain.k)
    support = np.stack([chain.modes[m].support[i] for i, m in enumerate(policy.modes)])
    return simplified_graph(support)


def induced_chain(chain: ConcreteChain, policy: SwitchingPolicy) -> InducedChain:
    policy.check(chain.n, chain.k)
    P = chain.matrices
    Q = np.stack([P[m, i] for i, m in enumerate(policy.modes)])
    Q.setflags(write=False)
    return InducedChain(Q, policy)


def validate_policy(chain, policy: SwitchingPolicy, goal: Iterable[int]) -> bool:
    """Graph-level check that ``policy`` reaches ``goal`` from every state and keeps it there."""
    chain = _spec_chain(chain)
    goal = frozenset(goal)
    if not goal:
        return False
    if any(g not in chain.modes[policy.modes[g]].absorbing for g in goal):
        return False
    return all(d < INF for d in distances_to_set(induced_graph(chain, policy), goal))


def _matrix(q) -> np.ndarray:
    return np.asarray(q.matrix if isinstance(q, InducedChain) else q, dtype=float)


def _require_reaches(Q: np.ndarray, target: frozenset[int]) -> None:
    dist = distances_to_set(simplified_graph(Q), target)
    stuck = [i for i, d in enumerate(dist) if d == INF]
    if stuck:
        raise NotAbsorbingError(f"states {stuck} cannot reach the target set")


def value_iteration_times(Q: np.ndarray, goal: Iterable[int], tol: float = VALUE_ITERATION_TOL,
                          max_iter: int = 10_000_000) -> np.ndarray:
    """Expected hitting times by iterating ``t <- 1 + Q_T t`` until the update is below ``tol``."""
    Q = np.asarray(Q, dtype=float)
    goal = frozenset(goal)
    T = np.array([i for i in range(Q.shape[0]) if i not in goal], dtype=int)
    QT = Q[np.ix_(T, T)]
    t = np.zeros(T.size)
    for _ in range(max_iter):
        nxt = 1.0 + QT @ t
        if np.max(np.abs(nxt - t), initial=0.0) < tol:
            t = nxt
            break
        t = nxt
    else:
        raise NotAbsorbingError("value iteration did not converge")
    out = np.zeros(Q.shape[0])
    out[T] = t
    return out


def expected_absorption_time(q, goal: Iterable[int]) -> np.ndarray:
    """Expected number of steps to first reach ``goal`` from each state.

    Solves ``(I - Q_T) t = 1`` on the non-goal states with a pivoted dense
    solve; falls back to value iteration if the residual exceeds 1e-10.
    """
    Q = _matrix(q)
    goal = frozenset(goal)
    _require_reaches(Q, goal)
    T = np.array([i for i in range(Q.shape[0]) if i not in goal], dtype=int)
    out = np.zeros(Q.shape[0])
    if T.size == 0:
        return out
    A = np.eye(T.size) - Q[np.ix_(T, T)]
    b = np.ones(T.size)
    try:
        t = np.linalg.solve(A, b)
        residual = np.max(np.abs(A @ t - b))
    except np.linalg.LinAlgError:
        residual = np.inf
    if not residual <= RESIDUAL_TOL:
        return value_iteration_times(Q, goal)
    out[T] = t
    return out


def absorption_probabilities(q, absorbing: Iterable[int]) -> np.ndarray:
    """Probability of ending in each absorbing state, one column per state in ascending index order.

    Rows of absorbing states are unit rows; every row sums to 1.
    """
    Q = _matrix(q)
    A = sorted(set(absorbing))
    if not A:
        raise NotAbsorbingError("empty absorbing set")
    for a in A:
        if Q[a, a] != 1.0:
            raise NotAbsorbingError(f"state {a} is not absorbing in the induced chain")
    _require_reaches(Q, frozenset(A))
    n = Q.shape[0]
    T = np.array([i for i in range(n) if i not in A], dtype=int)
    B = np.zeros((n, len(A)))
    B[A, np.arange(len(A))] = 1.0
    if T.size:
        M = np.eye(T.size) - Q[np.ix_(T, T)]
        R = Q[np.ix_(T, A)]
        B[T] = np.linalg.solve(M, R)
    return B


# --- policy files ----------------------------------------------------------

def format_policy(policy: SwitchingPolicy, states: StateSpace) -> str:
    return "".join(f"{lab} {m}\n" for lab, m in zip(states.labels, policy.one_based()))


def parse_policy(text: str, states: StateSpace, k: int | None = None) -> SwitchingPolicy:
    """Read ``<state-label> <mode-index>`` lines (mode indices 1-based)."""
    chosen: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or not parts[1].isdigit():
            raise ModelError("expected '<state-label> <mode-index>'", lineno)
        try:
            i = states.index(parts[0])
        except KeyError as e:
            raise ModelError(e.args[0], lineno) from None
        if i in chosen:
            raise ModelError(f"state {parts[0]} assigned twice", lineno)
        m = int(parts[1])
        if m < 1 or (k is not None and m > k):
            raise ModelError(f"mode index {m} out of range", lineno)
        chosen[i] = m - 1
    missing = [states.labels[i] for i in range(states.n) if i not in chosen]
    if missing:
        raise ModelError("policy does not cover states " + ", ".join(missing))
    return SwitchingPolicy(tuple(chosen[i] for i in range(states.n)))


__all__ = [
    "InducedChain",
    "NotAbsorbingError",
    "SwitchingPolicy",
    "UnstabilizableError",
    "absorption_probabilities",
    "closer_set",
    "expected_absorption_time",
    "format_policy",
    "induced_chain",
    "induced_graph",
    "parse_policy",
    "synthesize_policy",
    "validate_policy",
    "value_iteration_times",
]
