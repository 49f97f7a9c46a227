"""Random switched-chain structures for property tests."""

import numpy as np

from switchmc.model import ModeSpec, StateSpace, SwitchedChain


def random_mode(rng, n, absorbing, p_fwd=0.5, p_back=0.3, exact_rows=0.2):
    values = np.zeros((n, n))
    free = np.zeros((n, n), dtype=bool)
    for i in range(n):
        if i in absorbing or n == 1:
            values[i, i] = 1.0
            continue
        others = [j for j in range(n) if j != i]
        probs = np.array([p_fwd if j > i else p_back for j in others])
        support = [j for j, p in zip(others, probs) if rng.random() < p]
        if not support:
            support = [others[rng.integers(len(others))]]
        if rng.random() < 0.5:
            support.append(i)
        if len(support) == 1:
            values[i, support[0]] = 1.0
        elif rng.random() < exact_rows:
            w = rng.integers(1, 5, size=len(support)).astype(float)
            w /= w.sum()
            values[i, support] = w
            values[i, support[-1]] += 1.0 - values[i].sum()
        else:
            free[i, support] = True
    return ModeSpec(values, free)


def random_chain(rng, n=None, k=None, equal=True, **kw):
    n = n or int(rng.integers(1, 7))
    k = k or int(rng.integers(1, 4))
    size = int(rng.integers(0, n + 1)) if n > 1 else 1
    common = frozenset(int(a) for a in rng.choice(n, size=size, replace=False))
    modes = []
    for _ in range(k):
        if equal:
            ab = common
        else:
            ab = frozenset(int(a) for a in np.flatnonzero(rng.random(n) < 0.4))
        modes.append(random_mode(rng, n, ab, **kw))
    return SwitchedChain(StateSpace(tuple(f"s{i}" for i in range(n))), tuple(modes))


def reach_matrix(adj):
    """Reflexive-transitive closure of a boolean adjacency matrix."""
    n = adj.shape[0]
    r = adj | np.eye(n, dtype=bool)
    for _ in range(n):
        r = r | ((r.astype(int) @ r.astype(int)) > 0)
    return r
