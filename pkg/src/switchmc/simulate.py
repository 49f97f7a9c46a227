"""Monte Carlo trajectories, exact distribution propagation and trap-policy search."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels, _rng
from .analysis import _spec_chain
from .graph import INF, distances_to_set
from .model import ConcreteChain, SwitchedChain, absorbing_sets
from .policy import SwitchingPolicy, induced_graph

DEFAULT_MAX_STATES = 12


class SearchLimitError(ValueError):
    pass


# --- switching signals ----------------------------------------------------
# Mode indices are 0-based.

@dataclass(frozen=True)
class FixedMode:
    mode: int

    def kernel_table(self, n: int):
        return _kernels.BY_STATE, np.full(n, self.mode)

    def modes_used(self) -> set[int]:
        return {self.mode}


@dataclass(frozen=True)
class StatePolicy:
    policy: SwitchingPolicy

    def kernel_table(self, n: int):
        if len(self.policy.modes) != n:
            raise ValueError("policy length does not match state count")
        return _kernels.BY_STATE, np.array(self.policy.modes)

    def modes_used(self) -> set[int]:
        return set(self.policy.modes)


@dataclass(frozen=True)
class PeriodicSchedule:
    """Mode ``modes[t % len(modes)]`` at step ``t``."""

    modes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValueError("empty schedule")

    def kernel_table(self, n: int):
        return _kernels.PERIODIC, np.array(self.modes)

    def modes_used(self) -> set[int]:
        return set(self.modes)


@dataclass(frozen=True)
class ExplicitSequence:
    """Mode ``modes[t]`` at step ``t``; the last entry is held past the end."""

    modes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValueError("empty mode sequence")

    def kernel_table(self, n: int):
        return _kernels.EXPLICIT, np.array(self.modes)

    def modes_used(self) -> set[int]:
        return set(self.modes)


@dataclass(frozen=True)
class UniformRandom:
    """Independent uniformly drawn mode at every step.

    Draws come from each trial's own counter stream, so the run seed fixes
    them along with the transitions.
    """

    def kernel_table(self, n: int):
        return _kernels.RANDOM, np.zeros(1, dtype=np.int64)

    def modes_used(self) -> set[int]:
        return set()


Signal = FixedMode | StatePolicy | PeriodicSchedule | ExplicitSequence | UniformRandom


def _check_signal(signal, k: int) -> None:
    bad = [m for m in signal.modes_used() if not 0 <= m < k]
    if bad:
        raise ValueError(f"signal uses mode index {bad[0] + 1}, model has {k} modes")


def _mode_at(signal, t: int, state: int, key: int, k: int) -> int:
    if isinstance(signal, FixedMode):
        return signal.mode
    if isinstance(signal, StatePolicy):
        return signal.policy.modes[state]
    if isinstance(signal, PeriodicSchedule):
        return signal.modes[t % len(signal.modes)]
    if isinstance(signal, ExplicitSequence):
        return signal.modes[min(t, len(signal.modes) - 1)]
    return min(int(_rng.uniform(key, 2 * t + _rng.STREAM_MODE) * k), k - 1)


# --- exact propagation ------------------------------------------------------

def propagate_distribution(chain: ConcreteChain, signal, x0, steps: int) -> np.ndarray:
    """Distributions ``x(0..steps)`` as a ``(steps + 1, n)`` array.

    Under a state policy each step multiplies by the induced matrix; under
    ``UniformRandom`` by the average of the modes, which is the exact law of
    the state when the mode is drawn independently each step.
    """
    _check_signal(signal, chain.k)
    P = np.asarray(chain.matrices)
    x = np.asarray(x0, dtype=float)
    if x.shape != (chain.n,) or np.any(x < 0) or abs(x.sum() - 1) > 1e-12:
        raise ValueError("x0 must be a probability vector over the states")
    out = np.empty((steps + 1, chain.n))
    out[0] = x
    fixed = None
    if isinstance(signal, (FixedMode, StatePolicy)):
        _, table = signal.kernel_table(chain.n)
        fixed = P[table, np.arange(chain.n)]
    elif isinstance(signal, UniformRandom):
        fixed = P.mean(axis=0)
    for t in range(steps):
        M = fixed if fixed is not None else P[_mode_at(signal, t, 0, 0, chain.k)]
        out[t + 1] = out[t] @ M
    return out


# --- trajectories ---------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Visited states; ends at the absorption step when one occurs."""

    states: tuple[int, ...]
    absorbed_at: tuple[int, int] | None


def _stop_set(chain: SwitchedChain, goal) -> frozenset[int]:
    if goal is not None:
        return frozenset(goal)
    return absorbing_sets(chain)[2]


def run_trajectory(chain: ConcreteChain, signal, init: int, horizon: int, seed: int = 0,
                   trial: int = 0, goal: Iterable[int] | None = None) -> Trajectory:
    """Sample one path; reproduces trial ``trial`` of a batch run with the same seed.

    Absorption is the first entry into a state absorbing in every mode, or
    into ``goal`` when one is given.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    _check_signal(signal, chain.k)
    stop = _stop_set(chain.chain, goal)
    cdf = _kernels.sampling_cdf(np.asarray(chain.matrices))
    key = _rng.trial_key(seed, trial)
    s = int(init)
    states = [s]
    if s in stop:
        return Trajectory(tuple(states), (0, s))
    for t in range(horizon):
        m = _mode_at(signal, t, s, key, chain.k)
        u = _rng.uniform(key, 2 * t + _rng.STREAM_MOVE)
        row = cdf[m, s]
        j = 0
        while row[j] <= u:
            j += 1
        s = j
        states.append(s)
        if s in stop:
            return Trajectory(tuple(states), (t + 1, s))
    return Trajectory(tuple(states), None)


@dataclass(frozen=True)
class SimConfig:
    trials: int = 10_000
    horizon: int = 1_000
    seed: int = 0
    goal: frozenset[int] | None = None
    backend: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")


@dataclass(frozen=True)
class SimStats:
    trials: int
    horizon: int
    seed: int
    init: int
    absorbed: dict[int, float] = field(default_factory=dict)
    not_absorbed: float = 0.0
    absorbed_count: int = 0
    mean_hitting_time: float = math.nan
    stderr_hitting_time: float = math.nan

    @property
    def absorbed_fraction(self) -> float:
        return self.absorbed_count / self.trials


def estimate_absorption(chain: ConcreteChain, signal, init: int, config: SimConfig) -> SimStats:
    """Run ``config.trials`` trajectories from ``init`` and aggregate absorption statistics."""
    _check_signal(signal, chain.k)
    stop = _stop_set(chain.chain, config.goal)
    mask = np.zeros(chain.n, dtype=bool)
    mask[sorted(stop)] = True
    kind, table = signal.kernel_table(chain.n)
    final, hit = _kernels.simulate_batch(
        _kernels.sampling_cdf(np.asarray(chain.matrices)), kind, table, mask,
        np.full(config.trials, int(init)), config.seed, config.horizon, config.backend,
    )
    done = hit >= 0
    count = int(done.sum())
    absorbed = {a: float(np.count_nonzero(final[done] == a)) / config.trials for a in sorted(stop)}
    times = hit[done].astype(float)
    mean = float(times.mean()) if count else math.nan
    se = float(times.std(ddof=1) / math.sqrt(count)) if count > 1 else (0.0 if count else math.nan)
    return SimStats(
        trials=config.trials,
        horizon=config.horizon,
        seed=config.seed,
        init=int(init),
        absorbed=absorbed,
        not_absorbed=(config.trials - count) / config.trials,
        absorbed_count=count,
        mean_hitting_time=mean,
        stderr_hitting_time=se,
    )


# --- trap policies ----------------------------------------------------------

def _successors(chain: SwitchedChain) -> list[list[frozenset[int]]]:
    return [
        [frozenset(int(j) for j in np.flatnonzero(spec.support[s]) if j != s) for s in range(chain.n)]
        for spec in chain.modes
    ]


def trap_region(chain, target: Iterable[int], fixed: dict[int, int] | None = None) -> frozenset[int]:
    """Largest state set, disjoint from ``target``, that some policy can keep the chain inside.

    States in ``fixed`` must use their given mode; the rest may pick any.
    The result is non-empty exactly when a trap policy consistent with
    ``fixed`` exists.
    """
    chain = _spec_chain(chain)
    fixed = fixed or {}
    succ = _successors(chain)
    region = set(range(chain.n)) - set(target)
    changed = True
    while changed:
        changed = False
        for s in sorted(region):
            options = [fixed[s]] if s in fixed else range(chain.k)
            if not any(succ[m][s] <= region for m in options):
                region.discard(s)
                changed = True
    return frozenset(region)


def trapped_states(chain, policy: SwitchingPolicy, target: Iterable[int]) -> frozenset[int]:
    """States from which ``target`` is unreachable in the induced graph."""
    dist = distances_to_set(induced_graph(chain, policy), target)
    return frozenset(i for i, d in enumerate(dist) if d == INF)


def find_trap_policy(chain, target: Iterable[int] | None = None,
                     max_states: int = DEFAULT_MAX_STATES) -> SwitchingPolicy | None:
    """Lexicographically smallest state policy that makes ``target`` unreachable from some state.

    ``target`` defaults to the states absorbing in every mode.  States in
    ``target`` cannot influence reachability of ``target``; they are pinned
    to the last mode and not enumerated.  Each remaining state, in index
    order, takes the lowest mode for which a trap completion still exists
    (checked exactly with ``trap_region``), so the search never backtracks.
    """
    chain = _spec_chain(chain)
    if chain.n > max_states:
        raise SearchLimitError(f"{chain.n} states exceeds the search limit of {max_states}")
    target = absorbing_sets(chain)[2] if target is None else frozenset(target)
    fixed: dict[int, int] = {}
    if not trap_region(chain, target, fixed):
        return None
    for s in range(chain.n):
        if s in target:
            fixed[s] = chain.k - 1
            continue
        fixed[s] = next(m for m in range(chain.k) if trap_region(chain, target, {**fixed, s: m}))
    return SwitchingPolicy(tuple(fixed[s] for s in range(chain.n)))


def iter_trap_policies(chain, target: Iterable[int] | None = None) -> Iterator[SwitchingPolicy]:
    """Every one of the ``k**n`` policies that traps some state, in lexicographic order."""
    chain = _spec_chain(chain)
    target = absorbing_sets(chain)[2] if target is None else frozenset(target)
    for modes in itertools.product(range(chain.k), repeat=chain.n):
        pol = SwitchingPolicy(modes)
        if trapped_states(chain, pol, target):
            yield pol


def dump_trajectory(traj: Trajectory, labels: Sequence[str]) -> str:
    return "".join(f"{t} {labels[s]}\n" for t, s in enumerate(traj.states))
