"""Time the batch trajectory kernel on the numba and numpy backends.

    python3 benchmarks/bench_kernels.py --trials 10000 --horizon 10000
"""

import argparse
import time

import numpy as np

from switchmc import _kernels
from switchmc.model import load_fixture
from switchmc.policy import SwitchingPolicy
from switchmc.simulate import StatePolicy, UniformRandom


def time_backend(name, cdf, kind, table, stop, inits, seed, horizon, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = _kernels.simulate_batch(cdf, kind, table, stop, inits, seed, horizon, name)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--horizon", type=int, default=2_000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    conc = load_fixture("ex2").concretize()
    cdf = _kernels.sampling_cdf(conc.matrices)
    stop = np.array([False, False, False, True])
    inits = np.zeros(args.trials, dtype=np.int64)
    workloads = {
        # never absorbs, so every trial runs the full horizon
        "trap policy": StatePolicy(SwitchingPolicy.from_one_based((1, 1, 2, 2))),
        "random modes": UniformRandom(),
    }
    backends = ["numpy"] + (["numba"] if _kernels.numba is not None else [])
    if "numba" in backends:
        # compile outside the timed region
        _kernels.simulate_batch(cdf, 0, np.zeros(4), stop, inits[:2], 0, 2, "numba")

    print(f"trials={args.trials} horizon={args.horizon} repeats={args.repeats}")
    for label, signal in workloads.items():
        kind, table = signal.kernel_table(conc.n)
        results = {}
        for name in backends:
            secs, out = time_backend(name, cdf, kind, table, stop, inits, args.seed, args.horizon, args.repeats)
            results[name] = out
            hit = out[1]
            steps = int(np.where(hit >= 0, hit, args.horizon).sum())
            print(f"{label:13s} {name:6s} {secs:8.3f} s  {steps / secs / 1e6:8.1f} M steps/s")
        if len(results) == 2:
            same = all(np.array_equal(a, b) for a, b in zip(results["numpy"], results["numba"]))
            print(f"{label:13s} backends identical: {same}")


if __name__ == "__main__":
    main()
