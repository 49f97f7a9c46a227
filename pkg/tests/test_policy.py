import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _random_models import random_chain
from switchmc.analysis import check_stabilizable
from switchmc.model import ModelError, absorbing_sets, load_fixture
from switchmc.policy import (
    NotAbsorbingError,
    SwitchingPolicy,
    UnstabilizableError,
    absorption_probabilities,
    closer_set,
    expected_absorption_time,
    format_policy,
    induced_chain,
    induced_graph,
    parse_policy,
    synthesize_policy,
    validate_policy,
    value_iteration_times,
)


def doubling_series(Q, T):
    """(I - Q_T)^-1 applied to ones and to Q_{T,*}, by repeated squaring of the partial sums."""
    QT = Q[np.ix_(T, T)]
    S = np.eye(len(T))
    power = QT.copy()
    for _ in range(200):
        S = S + power @ S
        power = power @ power
        if np.abs(power).max(initial=0.0) < 1e-300:
            break
    return S


def random_stabilizable(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, equal=bool(rng.integers(2)))
    _, union, _ = absorbing_sets(chain)
    if not union:
        return None
    goal = frozenset(int(a) for a in rng.choice(sorted(union), size=int(rng.integers(1, len(union) + 1)),
                                                replace=False))
    if not check_stabilizable(chain, goal)[0]:
        return None
    policy = synthesize_policy(chain, goal, tie_break=f"seeded:{seed}")
    conc = chain.concretize(f"random:{seed}")
    return chain, conc, goal, policy


def test_synthesize_ex1():
    ex1 = load_fixture("ex1")
    policy = synthesize_policy(ex1, {1})
    assert policy.one_based() == (1, 1, 1, 2)
    assert policy.targets == (1, None, 1, 2)
    assert validate_policy(ex1, policy, {1})


def test_synthesize_unstabilizable():
    with pytest.raises(UnstabilizableError) as exc:
        synthesize_policy(load_fixture("ex1").restrict([1]), {1})
    assert exc.value.unreachable == (2, 3)
    assert "a3" in str(exc.value)


def test_seeded_tie_break_is_reproducible_and_valid():
    ex2 = load_fixture("ex2")
    a = synthesize_policy(ex2, {3}, tie_break="seeded:5")
    assert a == synthesize_policy(ex2, {3}, tie_break="seeded:5")
    assert validate_policy(ex2, a, {3})
    with pytest.raises(ValueError):
        synthesize_policy(ex2, {3}, tie_break="random")


def test_closer_set_ex1():
    ex1 = load_fixture("ex1")
    assert closer_set(ex1, {1}, 3) == {0, 1, 2}
    assert closer_set(ex1, {1}, 0) == {1}
    assert closer_set(ex1, {1}, 1) == frozenset()


def test_validate_policy_rejects():
    ex1 = load_fixture("ex1")
    assert not validate_policy(ex1, SwitchingPolicy.from_one_based((1, 2, 1, 1)), {1})
    assert not validate_policy(ex1, SwitchingPolicy.from_one_based((1, 1, 2, 1)), {1})
    assert not validate_policy(ex1, SwitchingPolicy.from_one_based((1, 1, 1, 2)), set())


def test_policy_shape_checks():
    ex1 = load_fixture("ex1")
    with pytest.raises(ValueError):
        induced_graph(ex1, SwitchingPolicy((0, 0)))
    with pytest.raises(ValueError):
        induced_graph(ex1, SwitchingPolicy((0, 0, 0, 2)))
    with pytest.raises(ValueError):
        SwitchingPolicy((-1,))


def test_induced_chain_rows():
    conc = load_fixture("ex1").concretize()
    q = induced_chain(conc, SwitchingPolicy.from_one_based((1, 1, 1, 2)))
    np.testing.assert_array_equal(q.matrix[3], [0, 0, 0.5, 0.5])
    np.testing.assert_array_equal(q.matrix[2], [0, 0.5, 0, 0.5])
    assert not q.matrix.flags.writeable


def test_expected_times_ex1_policy():
    conc = load_fixture("ex1").concretize()
    q = induced_chain(conc, SwitchingPolicy.from_one_based((1, 1, 1, 2)))
    np.testing.assert_allclose(expected_absorption_time(q, {1}), [3, 0, 4, 6], atol=1e-10)


def test_expected_times_ex2_mode1():
    conc = load_fixture("ex2").concretize()
    q = induced_chain(conc, SwitchingPolicy((0, 0, 0, 0)))
    np.testing.assert_allclose(expected_absorption_time(q, {3}), [6, 4, 2, 0], atol=1e-10)


def test_absorption_probabilities_ex1_mode1():
    conc = load_fixture("ex1").concretize()
    q = induced_chain(conc, SwitchingPolicy((0, 0, 0, 0)))
    B = absorption_probabilities(q, {1, 3})
    np.testing.assert_allclose(B, [[0.75, 0.25], [1, 0], [0.5, 0.5], [0, 1]], atol=1e-12)


def test_absorption_quantities_reject_trapped_chains():
    conc = load_fixture("ex2").concretize()
    q = induced_chain(conc, SwitchingPolicy.from_one_based((1, 1, 2, 2)))
    with pytest.raises(NotAbsorbingError):
        expected_absorption_time(q, {3})
    with pytest.raises(NotAbsorbingError):
        absorption_probabilities(q, {3})
    with pytest.raises(NotAbsorbingError):
        absorption_probabilities(q, {0})


def test_policy_file_roundtrip_and_errors():
    ex1 = load_fixture("ex1")
    policy = SwitchingPolicy.from_one_based((1, 1, 1, 2))
    text = format_policy(policy, ex1.states)
    assert text == "a1 1\na2 1\na3 1\na4 2\n"
    assert parse_policy("# comment\n" + text, ex1.states, 2) == policy
    for bad, fragment in [
        ("a1 1\na2 1\na3 1\n", "cover"),
        ("a1 1\na1 1\na3 1\na4 1\n", "twice"),
        ("a1 3\na2 1\na3 1\na4 1\n", "range"),
        ("a9 1\n", "a9"),
        ("a1\n", "expected"),
    ]:
        with pytest.raises(ModelError, match=fragment):
            parse_policy(bad, ex1.states, 2)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_synthesized_policies_are_valid_and_use_closer_moves(seed):
    case = random_stabilizable(seed)
    if case is None:
        return
    chain, _, goal, policy = case
    assert validate_policy(chain, policy, goal)
    _, dist = check_stabilizable(chain, goal)
    for a, (m, t) in enumerate(zip(policy.modes, policy.targets)):
        if a in goal:
            assert a in chain.modes[m].absorbing and t is None
        else:
            assert chain.modes[m].support[a, t] and dist[t] < dist[a]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_closed_forms_match_series_oracle(seed):
    case = random_stabilizable(seed)
    if case is None:
        return
    _, conc, goal, policy = case
    Q = induced_chain(conc, policy).matrix
    n = Q.shape[0]
    T = [i for i in range(n) if i not in goal]
    times = expected_absorption_time(Q, goal)
    np.testing.assert_allclose(times, value_iteration_times(Q, goal), rtol=1e-8, atol=1e-8)
    A = sorted(goal)
    B = absorption_probabilities(Q, goal)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-10)
    if T:
        S = doubling_series(Q, T)
        np.testing.assert_allclose(times[T], S @ np.ones(len(T)), rtol=1e-8, atol=1e-8)
        np.testing.assert_allclose(B[T], S @ Q[np.ix_(T, A)], rtol=1e-8, atol=1e-10)
    assert np.all(times[A] == 0)
