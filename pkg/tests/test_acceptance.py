"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary (see ``conftest.py``) and live with ``-s``.
"""

import functools
import itertools
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from _random_models import random_chain
from switchmc.analysis import (
    check_condition1,
    check_condition2,
    check_condition3,
    check_equal_absorbing_sets,
    check_stabilizable,
)
from switchmc.graph import INF, DiGraph, distances_to_set, max_distances_to_set, mode_graphs
from switchmc.model import absorbing_sets, fixture_text, load_fixture
from switchmc.policy import (
    SwitchingPolicy,
    absorption_probabilities,
    expected_absorption_time,
    induced_chain,
    synthesize_policy,
    validate_policy,
)
from switchmc.report import Verdict, analyze
from switchmc.simulate import (
    FixedMode,
    SimConfig,
    StatePolicy,
    estimate_absorption,
    find_trap_policy,
    iter_trap_policies,
)

RESULTS = []


def criterion(number, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException as e:
                detail = str(e).splitlines()[0] if str(e) else ""
                line = f"criterion {number} ({title}): FAIL - {type(e).__name__}: {detail}"
                RESULTS.append(line)
                print(line)
                raise
            line = f"criterion {number} ({title}): PASS"
            RESULTS.append(line)
            print(line)
        return run
    return wrap


# --- independent oracles ------------------------------------------------------

def path_enumeration_distance(g, v, targets):
    """Length of the shortest simple path from v into targets, found by exhaustive DFS."""
    best = INF
    stack = [(v, frozenset([v]), 0)]
    while stack:
        node, seen, length = stack.pop()
        if node in targets:
            best = min(best, length)
            continue
        for u in range(g.node_count):
            if (node, u) in g.edges and u not in seen:
                stack.append((u, seen | {u}, length + 1))
    return best


def first_step_times(Q, goal, tol=1e-13):
    """Expected hitting times by Gauss-Seidel sweeps over t_i = 1 + sum_j Q_ij t_j."""
    n = Q.shape[0]
    t = np.zeros(n)
    free = [i for i in range(n) if i not in goal]
    for _ in range(10_000_000):
        delta = 0.0
        for i in free:
            new = 1.0 + sum(Q[i, j] * t[j] for j in free)
            delta = max(delta, abs(new - t[i]))
            t[i] = new
        if delta < tol:
            return t
    raise RuntimeError("first-step iteration did not converge")


def within_3se(estimate, truth, se):
    return abs(estimate - truth) <= 3 * se


# --- criteria ---------------------------------------------------------------

@criterion(1, "fixture verdict matrix")
def test_fixture_verdict_matrix():
    expected = {"ex3": (True, False, False), "ex4": (False, True, False), "ex5": (False, False, True)}
    for name, want in expected.items():
        chain = load_fixture(name)
        got = tuple(c(chain).holds for c in (check_condition1, check_condition2, check_condition3))
        assert got == want, f"{name}: {got}"
        assert analyze(chain).arbitrary_switching is Verdict.GUARANTEED, name


@criterion(2, "stabilizability on EX1")
def test_stabilizability_ex1():
    ex1 = load_fixture("ex1")
    ok, d = check_stabilizable(ex1, {1})
    assert ok and d == (1, 0, 1, 2), d
    policy = synthesize_policy(ex1, {1}, tie_break="lowest")
    assert policy.one_based() == (1, 1, 1, 2), policy.one_based()
    assert validate_policy(ex1, policy, {1})


@criterion(3, "EX2 trap policy and simulation")
def test_ex2_refutation():
    ex2 = load_fixture("ex2")
    trap = find_trap_policy(ex2)
    assert trap is not None and trap.one_based() == (1, 1, 2, 2), trap
    conc = ex2.concretize("uniform")
    cfg = SimConfig(trials=10_000, horizon=10_000, seed=2024)
    trapped = estimate_absorption(conc, StatePolicy(trap), 0, cfg)
    assert trapped.absorbed_fraction == 0.0, trapped.absorbed_fraction
    for mode in (0, 1):
        st = estimate_absorption(conc, FixedMode(mode), 0, cfg)
        assert st.absorbed[3] >= 0.999, (mode, st.absorbed)


@criterion(4, "known max-distance tables")
def test_known_max_distances():
    for name, want in (("ex2", (3, 2, 2, 0)), ("ex3", (2, 2, 1, 0)), ("ex5", (3, 2, 1, 0))):
        got = max_distances_to_set(mode_graphs(load_fixture(name)), {3})
        assert got == want, (name, got)


@criterion(5, "unequal absorbing sets always admit a trap")
def test_unequal_absorbing_sets():
    assert not check_equal_absorbing_sets(load_fixture("ex1"))
    for name in ("ex2", "ex3", "ex4", "ex5"):
        assert check_equal_absorbing_sets(load_fixture(name)), name
    rng = np.random.default_rng(5)
    found = 0
    while found < 200:
        chain = random_chain(rng, n=int(rng.integers(1, 7)), k=int(rng.integers(2, 4)), equal=False)
        if check_equal_absorbing_sets(chain):
            continue
        found += 1
        assert find_trap_policy(chain) is not None, chain


@criterion(6, "oracle equivalence")
def test_oracle_equivalence():
    rng = np.random.default_rng(6)
    for _ in range(500):
        n = int(rng.integers(1, 7))
        adj = (rng.random((n, n)) < rng.uniform(0.1, 0.6)) & ~np.eye(n, dtype=bool)
        g = DiGraph(n, frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(adj))))
        targets = frozenset(int(t) for t in np.flatnonzero(rng.random(n) < 0.3))
        dist = distances_to_set(g, targets)
        assert dist == tuple(path_enumeration_distance(g, v, targets) for v in range(n))

    pairs = 0
    while pairs < 100:
        chain = random_chain(rng, equal=bool(rng.integers(2)))
        _, union, _ = absorbing_sets(chain)
        if not union:
            continue
        goal = frozenset(int(a) for a in rng.choice(sorted(union), size=int(rng.integers(1, len(union) + 1)),
                                                    replace=False))
        if not check_stabilizable(chain, goal)[0]:
            continue
        policy = synthesize_policy(chain, goal, tie_break=f"seeded:{pairs}")
        assert validate_policy(chain, policy, goal)
        Q = induced_chain(chain.concretize(f"random:{pairs}"), policy).matrix
        diff = np.max(np.abs(expected_absorption_time(Q, goal) - first_step_times(Q, goal)))
        assert diff <= 1e-8, diff
        pairs += 1

    cases = [
        ("ex1", FixedMode(0), SwitchingPolicy((0,) * 4), 0, (1, 3)),
        ("ex2", FixedMode(0), SwitchingPolicy((0,) * 4), 0, (3,)),
    ]
    for name, signal, policy, init, absorbing in cases:
        conc = load_fixture(name).concretize()
        B = absorption_probabilities(induced_chain(conc, policy), absorbing)
        st = estimate_absorption(conc, signal, init, SimConfig(trials=100_000, horizon=10_000, seed=66,
                                                               goal=frozenset(absorbing)))
        for col, a in enumerate(absorbing):
            p = B[init, col]
            se = math.sqrt(p * (1 - p) / st.trials)
            assert within_3se(st.absorbed[a], p, se), (name, a, st.absorbed[a], p)


@criterion(7, "EX2 closed-form expected times")
def test_ex2_expected_times():
    conc = load_fixture("ex2").concretize("uniform")
    Q = induced_chain(conc, SwitchingPolicy((0,) * 4)).matrix
    oracle = first_step_times(Q, {3})
    np.testing.assert_allclose(oracle, [6, 4, 2, 0], rtol=0, atol=1e-10)
    times = expected_absorption_time(Q, {3})
    np.testing.assert_allclose(times, [6, 4, 2, 0], rtol=0, atol=1e-10)
    for init in range(3):
        st = estimate_absorption(conc, FixedMode(0), init, SimConfig(trials=100_000, horizon=10_000, seed=77,
                                                                     goal=frozenset({3})))
        assert st.absorbed_fraction == 1.0
        assert within_3se(st.mean_hitting_time, times[init], st.stderr_hitting_time), (init, st.mean_hitting_time)


@criterion(8, "soundness sweep")
def test_soundness_sweep():
    rng = np.random.default_rng(8)
    checked = 0
    while checked < 1000:
        chain = random_chain(rng, n=int(rng.integers(2, 6)), k=int(rng.integers(1, 4)), equal=True)
        if len(chain.modes[0].absorbing) == chain.n:
            continue
        if not any(c(chain).holds for c in (check_condition1, check_condition2, check_condition3)):
            continue
        checked += 1
        trap = next(iter_trap_policies(chain), None)
        assert trap is None, (chain, trap)


def _cli(args, **env):
    return subprocess.run([sys.executable, "-m", "switchmc", *args], capture_output=True, check=True,
                          env={**os.environ, **env}).stdout


@criterion(9, "deterministic reports")
def test_determinism(tmp_path):
    model = tmp_path / "ex2.model"
    model.write_text(fixture_text("ex2"))
    runs = [
        ["simulate", str(model), "--signal", "random", "--init", "all", "--trials", "5000",
         "--horizon", "100", "--seed", "9"],
        ["simulate", str(model), "--signal", "mode:2", "--init", "a1", "--seed", "9", "--output", "json"],
        ["find-trap", str(model)],
        ["find-trap", str(model), "--output", "json"],
    ]
    envs = [{}, {"NUMBA_NUM_THREADS": "1"}, {"SWITCHMC_DISABLE_NUMBA": "1"}]
    for args, env in itertools.product(runs, envs):
        assert _cli(args) == _cli(args) == _cli(args, **env), (args, env)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
