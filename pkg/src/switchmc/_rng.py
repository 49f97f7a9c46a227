"""Stateless counter-based uniforms.

A draw is a pure function of ``(seed, trial, counter)``: the trial key is a
splitmix64 hash of the master seed and the trial index, and the draw is the
splitmix64 output at position ``counter`` of that key's stream.  Trials can
therefore run in any order or on any thread and give the same numbers.

Three implementations share the constants: plain Python ints (single
trajectories), numpy ``uint64`` arrays (vectorised fallback) and numba
scalars (jitted kernels, see ``_kernels``).
"""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / (1 << 53)

# counter = 2 * step + stream
STREAM_MOVE = 0
STREAM_MODE = 1


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * MUL1) & MASK
    z = ((z ^ (z >> 27)) * MUL2) & MASK
    return z ^ (z >> 31)


def trial_key(seed: int, trial: int) -> int:
    return mix64((seed & MASK) ^ mix64(trial + GOLDEN))


def uniform(key: int, counter: int) -> float:
    return (mix64(key + (counter + 1) * GOLDEN) >> 11) * INV_2_53


_U = np.uint64


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> _U(30))
    z = z * _U(MUL1)
    z = z ^ (z >> _U(27))
    z = z * _U(MUL2)
    return z ^ (z >> _U(31))


def trial_keys_np(seed: int, trials: np.ndarray) -> np.ndarray:
    t = np.asarray(trials).astype(np.uint64)
    return mix64_np(_U(seed & MASK) ^ mix64_np(t + _U(GOLDEN)))


def uniform_np(keys: np.ndarray, counter: int) -> np.ndarray:
    offset = _U(((counter + 1) * GOLDEN) & MASK)
    return (mix64_np(keys + offset) >> _U(11)).astype(np.float64) * INV_2_53
