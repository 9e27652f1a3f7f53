"""Numba kernels against the pure-numpy fallback.

Each case runs once per backend to warm up (JIT compile, coefficient
caches), then ``--repeat`` timed runs; the best time is reported together
with a check that both backends returned the same numbers.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]
"""

import argparse
import time

import numpy as np

from erwlab import _backend, embedding, exact, limits, walk
from erwlab.rng import streams

SEED = 2024


def cases(scale):
    r = lambda n: max(1, int(n * scale))

    def paths(be):
        return walk.path_matrix(0.6, 0, 1000, r(2000), streams(SEED, 0, r(2000)), backend=be)

    def memory(be):
        return walk.path_matrix(0.6, 0, 1000, r(500), streams(SEED, 0, r(500)), "memory",
                                backend=be)

    def zeros(be):
        return walk.zero_counts(0.4, 0, [4096], r(2000), streams(SEED, 0, r(2000)),
                                backend=be)

    def returns(be):
        s = walk.first_returns(0.5, 0, 4096, r(5000), streams(SEED, 0, r(5000)), backend=be)
        return s.values

    def dp(be):
        return exact.exact_table(0.3, 0, r(4096), True, keep_mass=False, backend=be).survival

    def exits(be):
        pr = embedding.ExitProblem(1.0, 0.0)
        return embedding.sample_exits(pr, r(20000), streams(SEED, 0, r(20000)),
                                      backend=be)[0]

    def embed(be):
        return embedding.sample_embedded_paths(0.25, 0, 256, r(200),
                                               streams(SEED, 0, r(200)), backend=be).times

    def h(be):
        return limits.sample_H_levels(0.25, [1.0], r(2000), streams(SEED, 0, r(2000)),
                                      backend=be)

    def eta(be):
        return limits.sample_eta_levels(0.6, [1.0], r(2000), streams(SEED, 0, r(2000)),
                                        backend=be)

    return [("walk paths (marginal)", paths), ("walk paths (memory)", memory),
            ("zero counts", zeros), ("first returns", returns), ("exact DP", dp),
            ("exit times", exits), ("embedded paths", embed), ("H(1)", h), ("eta(1)", eta)]


def best_time(fn, backend, repeat):
    out = fn(backend)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(backend)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplies the workload")
    args = ap.parse_args(argv)
    if not _backend.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':24s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}  match")
    for name, fn in cases(args.scale):
        t_nb, a = best_time(fn, "numba", args.repeat)
        t_np, b = best_time(fn, "numpy", args.repeat)
        match = np.allclose(a, b, rtol=1e-12, atol=0)
        print(f"{name:24s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}  {match}")


if __name__ == "__main__":
    main()
