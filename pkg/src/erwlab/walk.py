"""Elephant random walk simulation under P_k, zero bookkeeping and return times."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coeffs import as_param
from .rng import as_streams

MODES = ("marginal", "memory")


def _check_start(k):
    if k < 0 or k % 2:
        raise ValueError(f"start time must be an even non-negative integer, got {k}")


def step_probability(p, n: int, s: int) -> float:
    """Probability that the step after time ``n`` at position ``s`` is +1."""
    p = as_param(p).p
    if n < 1:
        raise ValueError("time must be >= 1")
    if abs(s) > n:
        raise ValueError(f"|s| = {abs(s)} exceeds n = {n}")
    return 0.5 + (2.0 * p - 1.0) * s / (2.0 * n)


def sequence_probability(p, k: int, signs) -> float:
    """Exact probability under P_k of the step sequence ``signs`` (entries +-1)."""
    p = as_param(p).p
    _check_start(k)
    prob = 1.0
    s = 0
    for j, x in enumerate(signs):
        t = k + j
        q = 0.5 if t == 0 else 0.5 + (2.0 * p - 1.0) * s / (2.0 * t)
        prob *= q if x > 0 else 1.0 - q
        s += x
    return prob


@dataclass(frozen=True)
class WalkPath:
    """Positions S(k), ..., S(k+n) of one walk started from 0 at time ``start_time``."""

    start_time: int
    positions: np.ndarray
    zero_indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        if pos.ndim != 1 or pos.size == 0 or pos[0] != 0:
            raise ValueError("positions must be a 1-d sequence starting at 0")
        if pos.size > 1 and np.any(np.abs(np.diff(pos)) != 1):
            raise ValueError("steps must be +-1")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        z = np.flatnonzero(pos[1:] == 0) + 1
        z.flags.writeable = False
        object.__setattr__(self, "zero_indices", z)

    @property
    def steps(self) -> int:
        return self.positions.size - 1


def simulate_path(p, start_time: int, steps: int, rng=None, mode: str = "marginal",
                  *, backend=None) -> WalkPath:
    return simulate_paths(p, start_time, steps, 1, rng, mode, backend=backend)[0]


def simulate_paths(p, start_time: int, steps: int, replicates: int, rng=None,
                   mode: str = "marginal", *, backend=None) -> list[WalkPath]:
    pos = path_matrix(p, start_time, steps, replicates, rng, mode, backend=backend)
    return [WalkPath(start_time, row) for row in pos]


def path_matrix(p, start_time, steps, replicates, rng=None, mode="marginal", *, backend=None):
    """Positions as a (replicates, steps + 1) integer array.

    ``rng`` is a generator/seed shared by all replicates, or a list holding
    one generator per replicate.  ``mode="memory"`` keeps the full step
    history and recalls a uniform past step, ``"marginal"`` uses the
    Bernoulli step law; the two sample the same distribution.
    """
    mp = as_param(p)
    _check_start(start_time)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    gens = as_streams(rng, replicates)
    name = "walk_paths" if mode == "marginal" else "walk_memory"
    return kernels.run(name, gens, replicates, mp.p, int(start_time), int(steps),
                       backend=backend)


def count_zeros(path: WalkPath, horizon: int) -> int:
    if horizon > path.steps:
        raise ValueError("horizon exceeds path length")
    return int(np.count_nonzero(path.positions[1:horizon + 1] == 0))


def zeros_enumeration(path: WalkPath) -> np.ndarray:
    """Absolute zero times: the start time followed by the times of each return."""
    return np.concatenate(([path.start_time], path.start_time + path.zero_indices))


def zero_counts(p, start_time, horizons, replicates, rng=None, *, backend=None):
    """Z(n) for each horizon in ``horizons`` (sorted), shape (replicates, len(horizons))."""
    mp = as_param(p)
    _check_start(start_time)
    hz = np.asarray(horizons, dtype=np.int64)
    if hz.ndim != 1 or np.any(np.diff(hz) < 0) or np.any(hz < 0):
        raise ValueError("horizons must be sorted non-negative integers")
    gens = as_streams(rng, replicates)
    return kernels.run("zero_counts", gens, replicates, mp.p, int(start_time), hz,
                       backend=backend)


def zero_times(p, start_time, count, replicates, max_steps, rng=None, *, backend=None):
    """Absolute times of the first ``count`` returns; -1 where ``max_steps`` ran out."""
    mp = as_param(p)
    _check_start(start_time)
    gens = as_streams(rng, replicates)
    return kernels.run("zero_times", gens, replicates, mp.p, int(start_time), int(count),
                       int(max_steps), backend=backend)


@dataclass(frozen=True)
class ReturnSample:
    value: int
    cap: int
    censored: bool

    def __post_init__(self):
        if not self.censored and not (2 <= self.value <= self.cap and self.value % 2 == 0):
            raise ValueError(f"invalid return time {self.value} for cap {self.cap}")


@dataclass(frozen=True)
class ReturnSamples:
    """A batch of first-return times sharing (p, k, cap); censored rows hold ``cap``."""

    p: float
    start_time: int
    cap: int
    values: np.ndarray
    censored: np.ndarray

    def __len__(self):
        return self.values.size

    def __getitem__(self, i) -> ReturnSample:
        return ReturnSample(int(self.values[i]), self.cap, bool(self.censored[i]))


def first_return(p, start_time, cap, rng=None, *, backend=None) -> ReturnSample:
    return first_returns(p, start_time, cap, 1, rng, backend=backend)[0]


def first_returns(p, start_time, cap, replicates, rng=None, *, backend=None) -> ReturnSamples:
    mp = as_param(p)
    _check_start(start_time)
    if cap < 2:
        raise ValueError("cap must be >= 2")
    gens = as_streams(rng, replicates)
    values, censored = kernels.run("first_return", gens, replicates, mp.p,
                                   int(start_time), int(cap), backend=backend)
    return ReturnSamples(mp.p, int(start_time), int(cap), values, censored)
