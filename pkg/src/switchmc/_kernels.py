"""Batch trajectory kernel, with a numba path and a vectorised numpy path.

Set ``SWITCHMC_DISABLE_NUMBA=1`` (or pass ``backend="numpy"``) to force the
numpy path.  Both paths consume the same counter-based random stream and
return identical results.
"""

from __future__ import annotations

import os

import numpy as np

from ._rng import GOLDEN, INV_2_53, MUL1, MUL2, STREAM_MODE, STREAM_MOVE, trial_keys_np, uniform_np

try:
    import numba
    from numba import njit, prange

    # skip the TBB probe; old system TBB builds only produce a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None

# signal kinds understood by the kernels
BY_STATE, PERIODIC, EXPLICIT, RANDOM = 0, 1, 2, 3


def backend() -> str:
    if numba is None or os.environ.get("SWITCHMC_DISABLE_NUMBA", "") not in ("", "0"):
        return "numpy"
    return "numba"


def sampling_cdf(matrices: np.ndarray) -> np.ndarray:
    """Row-wise CDFs with everything from the last positive entry on pinned to 1.0.

    Sampling the first index whose CDF exceeds ``u`` in [0, 1) then never
    lands on a zero-probability state.
    """
    cdf = np.cumsum(matrices, axis=-1)
    k, n, _ = matrices.shape
    for m in range(k):
        for i in range(n):
            last = np.flatnonzero(matrices[m, i] > 0)[-1]
            cdf[m, i, last:] = 1.0
    return np.ascontiguousarray(cdf)


def simulate_numpy(cdf, kind, table, stop, inits, seed, horizon):
    trials = inits.shape[0]
    k = cdf.shape[0]
    states = inits.astype(np.int64).copy()
    hit = np.full(trials, -1, dtype=np.int64)
    hit[stop[states]] = 0
    active = np.flatnonzero(~stop[states])
    keys = trial_keys_np(seed, np.arange(trials))
    L = table.shape[0]
    for t in range(horizon):
        if active.size == 0:
            break
        s = states[active]
        kk = keys[active]
        if kind == BY_STATE:
            modes = table[s]
        elif kind == PERIODIC:
            modes = np.full(active.size, table[t % L])
        elif kind == EXPLICIT:
            modes = np.full(active.size, table[min(t, L - 1)])
        else:
            modes = np.minimum((uniform_np(kk, 2 * t + STREAM_MODE) * k).astype(np.int64), k - 1)
        u = uniform_np(kk, 2 * t + STREAM_MOVE)
        nxt = (cdf[modes, s] <= u[:, None]).sum(axis=1)
        states[active] = nxt
        done = stop[nxt]
        hit[active[done]] = t + 1
        active = active[~done]
    return states, hit


if numba is not None:
    _G = numba.uint64(GOLDEN)
    _M1 = numba.uint64(MUL1)
    _M2 = numba.uint64(MUL2)

    @njit(cache=True, inline="always")
    def _mix64(z):
        z = z ^ (z >> numba.uint64(30))
        z = z * _M1
        z = z ^ (z >> numba.uint64(27))
        z = z * _M2
        return z ^ (z >> numba.uint64(31))

    @njit(cache=True, inline="always")
    def _uniform(key, counter):
        z = _mix64(key + numba.uint64(counter + 1) * _G)
        return numba.float64(z >> numba.uint64(11)) * INV_2_53

    @njit(cache=True, parallel=True)
    def _simulate_numba(cdf, kind, table, stop, inits, seed, horizon):
        trials = inits.shape[0]
        k = cdf.shape[0]
        L = table.shape[0]
        states = np.empty(trials, dtype=np.int64)
        hit = np.full(trials, -1, dtype=np.int64)
        useed = numba.uint64(seed)
        for r in prange(trials):
            key = _mix64(useed ^ _mix64(numba.uint64(r) + _G))
            s = inits[r]
            if stop[s]:
                hit[r] = 0
            else:
                for t in range(horizon):
                    if kind == BY_STATE:
                        m = table[s]
                    elif kind == PERIODIC:
                        m = table[t % L]
                    elif kind == EXPLICIT:
                        m = table[min(t, L - 1)]
                    else:
                        m = min(np.int64(_uniform(key, 2 * t + STREAM_MODE) * k), k - 1)
                    u = _uniform(key, 2 * t + STREAM_MOVE)
                    j = 0
                    while cdf[m, s, j] <= u:
                        j += 1
                    s = j
                    if stop[s]:
                        hit[r] = t + 1
                        break
            states[r] = s
        return states, hit


def simulate_batch(cdf, kind, table, stop, inits, seed, horizon, backend_name=None):
    """Run ``len(inits)`` independent trials; trial ``r`` uses stream ``(seed, r)``.

    Returns final states and hitting times (``-1`` when no stop state was
    entered within ``horizon`` steps).
    """
    name = backend_name or backend()
    args = (
        np.ascontiguousarray(cdf, dtype=np.float64),
        int(kind),
        np.ascontiguousarray(table, dtype=np.int64),
        np.ascontiguousarray(stop, dtype=np.bool_),
        np.ascontiguousarray(inits, dtype=np.int64),
        int(seed) & ((1 << 64) - 1),
        int(horizon),
    )
    if name == "numba":
        if numba is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return _simulate_numba(*args[:5], np.uint64(args[5]), args[6])
    if name != "numpy":
        raise ValueError(f"unknown backend {name!r}")
    return simulate_numpy(*args)
