"""Brownian embedding of the martingale M_k(n) = a_{k+n} S(k+n) by iterated exits.

Step n starts from the current level M_k(n) and waits for the Brownian
increment to leave the interval c +- a_{k+n+1}, where the shift
c = (1 - 2p) M_k(n) / (k + n + 2p - 1) is the martingale drift correction.
The exit side is the next walk step, so one random stream produces the
walk and its embedding together.

Exit times come from an adaptive Gaussian grid (variance d^2/res per step,
d the distance to the nearer barrier).  Within ``shell * x`` of a barrier
the side is settled by gambler's ruin and the mean residual time is added,
which keeps E tau(x, y) = x^2 - y^2 exact.  After each exit the level is
snapped to the barrier; the overshoot is kept as ``errors`` together with a
grid tolerance for pathwise checks.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .coeffs import as_param, sequence
from .rng import as_generator, as_streams
from .stats import fit_loglog

RESOLUTION = 16.0
SHELL = 1e-6
MAX_STEPS = 10**6
METHODS = ("grid", "exact-side")


def _check_start(mp, k):
    if k < 0 or k % 2:
        raise ValueError(f"start time must be an even non-negative integer, got {k}")
    if mp.p == 0.0 and k < 2:
        raise ValueError("p = 0 needs k >= 2 (a_1 = 0 makes the first exit degenerate)")


@dataclass(frozen=True)
class ExitProblem:
    """Exit of y + B from (-x, x)."""

    halfwidth: float
    start_offset: float

    def __post_init__(self):
        x, y = float(self.halfwidth), float(self.start_offset)
        if not (x > 0.0 and math.isfinite(x)):
            raise ValueError(f"halfwidth must be positive, got {x}")
        if abs(y) > x * (1.0 + 1e-12):
            raise ValueError(f"|offset| {abs(y)} exceeds halfwidth {x}")
        object.__setattr__(self, "halfwidth", x)
        object.__setattr__(self, "start_offset", max(-x, min(x, y)))

    @property
    def degenerate(self) -> bool:
        return abs(self.start_offset) >= self.halfwidth

    @property
    def mean_time(self) -> float:
        return self.halfwidth**2 - self.start_offset**2

    @property
    def up_probability(self) -> float:
        return (self.halfwidth + self.start_offset) / (2.0 * self.halfwidth)


def _center(p, t, m_value):
    # shift of the exit interval at absolute time t; zero at the origin so
    # that t + 2p - 1 = 0 (p = 1/2, t = 0) never divides
    if m_value == 0.0:
        return 0.0
    return (1.0 - 2.0 * p) / (t + 2.0 * p - 1.0) * m_value


def exit_interval(p, start_time: int, step_index: int, m_value: float) -> ExitProblem:
    """Exit problem for the increment after M_k(n) = ``m_value``."""
    mp = as_param(p)
    t = start_time + step_index
    if t < 0:
        raise ValueError("time must be non-negative")
    seq = sequence(mp)
    a_t = seq.a(t)
    if a_t == 0.0:
        if m_value != 0.0:
            raise ValueError(f"M must be 0 when a_{t} = 0, got {m_value}")
        s = 0
    else:
        ratio = m_value / a_t
        s = round(ratio)
        if abs(ratio - s) > 1e-9 * max(1.0, abs(ratio)):
            raise ValueError(f"{m_value} is not on the lattice a_{t} * Z")
        if abs(s) > t:
            raise ValueError(f"position {s} is unreachable at time {t}")
    x = seq.a(t + 1)
    if x == 0.0:
        raise ValueError(f"a_{t + 1} = 0: the exit interval is empty")
    return ExitProblem(x, -_center(mp.p, t, m_value))


def embedded_up_probability(p, start_time: int, step_index: int, s: int) -> float:
    """Chance the embedded step after S(k+n) = s is +1: (x - c) / 2x."""
    mp = as_param(p)
    t = start_time + step_index
    if abs(s) > t:
        raise ValueError(f"|s| = {abs(s)} exceeds k + n = {t}")
    pr = exit_interval(mp, start_time, step_index, sequence(mp).a(t) * s)
    return pr.up_probability


def sample_exits(problem: ExitProblem, samples: int, rng=None, method: str = "grid", *,
                 res: float = RESOLUTION, shell: float = SHELL, max_steps: int = MAX_STEPS,
                 backend=None):
    """``samples`` independent exits; returns (times, sides, overshoots)."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    gens = as_streams(rng, samples)
    return kernels.run("exits", gens, samples, problem.halfwidth, problem.start_offset,
                       float(res), float(shell), int(max_steps), method == "exact-side",
                       backend=backend)


def sample_exit(problem: ExitProblem, rng=None, method: str = "grid", **kw):
    """One exit: (time, side) with side +1 for the upper barrier."""
    times, sides, _ = sample_exits(problem, 1, as_generator(rng), method, **kw)
    return float(times[0]), int(sides[0])


def calibrate_exit_resolution(rng=None, samples: int = 10**6, start: float = 8.0,
                              tol: float = 0.002, max_doublings: int = 4, **kw):
    """Halve the grid variance until the mean of tau(1, 0) moves by < ``tol``.

    Returns (resolution, list of (resolution, mean)).
    """
    gen = as_generator(rng)
    unit = ExitProblem(1.0, 0.0)
    res = float(start)
    prev = float(np.mean(sample_exits(unit, samples, gen, res=res, **kw)[0]))
    history = [(res, prev)]
    for _ in range(max_doublings):
        res *= 2.0
        cur = float(np.mean(sample_exits(unit, samples, gen, res=res, **kw)[0]))
        history.append((res, cur))
        if abs(cur - prev) < tol * abs(prev):
            return res, history
        prev = cur
    return res, history


@dataclass(frozen=True, eq=False)
class EmbeddedPath:
    """One embedded path: T[n], M[n] = a_{k+n} S(k+n), V[n] and the coupled walk."""

    p: float
    start_time: int
    times: np.ndarray
    values: np.ndarray
    compensator: np.ndarray
    positions: np.ndarray
    errors: np.ndarray
    tolerances: np.ndarray

    @property
    def steps(self) -> int:
        return self.times.size - 1


@dataclass(frozen=True, eq=False)
class EmbeddedBatch:
    """Replicates of embedded paths as (replicates, n + 1) arrays."""

    p: float
    start_time: int
    times: np.ndarray
    values: np.ndarray
    compensator: np.ndarray
    positions: np.ndarray
    errors: np.ndarray
    tolerances: np.ndarray

    def __len__(self):
        return self.times.shape[0]

    def __getitem__(self, r) -> EmbeddedPath:
        return EmbeddedPath(self.p, self.start_time, self.times[r], self.values[r],
                            self.compensator[r], self.positions[r], self.errors[r],
                            self.tolerances[r])


def sample_embedded_paths(p, start_time: int, n_steps: int, replicates: int, rng=None,
                          method: str = "grid", *, res: float = RESOLUTION,
                          shell: float = SHELL, max_steps: int = MAX_STEPS,
                          backend=None) -> EmbeddedBatch:
    mp = as_param(p)
    _check_start(mp, start_time)
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    a = np.ascontiguousarray(sequence(mp).a_upto(start_time + n_steps + 1))
    gens = as_streams(rng, replicates)
    times, comp, pos, errs, tols = kernels.run(
        "embed", gens, replicates, mp.p, int(start_time), int(n_steps), a, float(res),
        float(shell), int(max_steps), method == "exact-side", backend=backend)
    values = a[start_time:start_time + n_steps + 1] * pos
    return EmbeddedBatch(mp.p, int(start_time), times, values, comp, pos, errs, tols)


def sample_embedded_path(p, start_time: int, n_steps: int, rng=None, method="grid",
                         **kw) -> EmbeddedPath:
    return sample_embedded_paths(p, start_time, n_steps, 1, as_generator(rng), method,
                                 **kw)[0]


def mean_time_identity(batch: EmbeddedBatch, n: int | None = None):
    """Compare mean T[n] with A_{k+n} - A_k - mean V[n].

    Returns (mean of T[n] + V[n], predicted A increment, standard error).
    The combination T + V has mean exactly A_{k+n} - A_k.
    """
    n = batch.times.shape[1] - 1 if n is None else n
    k = batch.start_time
    seq = sequence(batch.p)
    x = batch.times[:, n] + batch.compensator[:, n]
    target = seq.A(k + n) - seq.A(k)
    return float(x.mean()), target, float(x.std(ddof=1) / math.sqrt(x.size))


@dataclass(frozen=True)
class CompensatorReport:
    p: float
    n_grid: np.ndarray
    mean_v: np.ndarray
    se: np.ndarray
    slope: float
    bound: float
    ratio: float
    passed: bool


def compensator_report(batch: EmbeddedBatch, n_grid) -> CompensatorReport:
    """Growth of E V_k(n) over ``n_grid`` from an existing batch.

    For p < 1/2 the fitted log-log slope must not exceed 2 - 4p + 0.1; for
    p >= 1/2 E V must stay bounded: slope <= 0.05 and last/first ratio <= 1.2.
    """
    n_grid = np.asarray(sorted(n_grid), dtype=np.int64)
    v = batch.compensator[:, n_grid]
    mean_v = v.mean(axis=0)
    se = v.std(axis=0, ddof=1) / math.sqrt(v.shape[0])
    if np.all(mean_v == 0.0):
        slope, ratio = 0.0, 1.0
    else:
        slope = fit_loglog(n_grid, mean_v)[0]
        ratio = float(mean_v[-1] / mean_v[0])
    if batch.p < 0.5:
        bound = 2.0 - 4.0 * batch.p + 0.1
        passed = slope <= bound
    else:
        bound = 0.05
        passed = slope <= bound and ratio <= 1.2
    return CompensatorReport(batch.p, n_grid, mean_v, se, float(slope), bound, ratio,
                             bool(passed))


def compensator_moment_check(p, start_time: int, n_grid, replicates: int, rng=None,
                             **kw) -> CompensatorReport:
    if replicates < 1000:
        raise ValueError("replicates must be >= 1000")
    batch = sample_embedded_paths(p, start_time, int(max(n_grid)), replicates, rng, **kw)
    return compensator_report(batch, n_grid)


@dataclass(frozen=True)
class ConcentrationReport:
    p: float
    eps: float
    n_grid: np.ndarray
    frequency: np.ndarray
    violations: int
    passed: bool


def concentration_report(batch: EmbeddedBatch, n_grid, eps: float) -> ConcentrationReport:
    """Frequency of sup_{l<=n} |T_l - (A_{k+l} - A_k)| >= eps (k+n)^(3-4p).

    Passes when the frequency is non-increasing along ``n_grid`` with at
    most one violation.
    """
    mp = as_param(batch.p)
    n_grid = np.asarray(sorted(n_grid), dtype=np.int64)
    k = batch.start_time
    n_max = batch.times.shape[1] - 1
    A = sequence(mp).A_upto(k + n_max)
    dev = np.abs(batch.times - (A[k:] - A[k])[None, :])
    run_max = np.maximum.accumulate(dev, axis=1)
    thr = eps * (k + n_grid).astype(float) ** mp.beta
    freq = np.mean(run_max[:, n_grid] >= thr[None, :], axis=0)
    violations = int(np.sum(np.diff(freq) > 0))
    return ConcentrationReport(mp.p, float(eps), n_grid, freq, violations,
                               violations <= 1)


def concentration_check(p, start_time: int, n_grid, eps: float, replicates: int,
                        rng=None, **kw) -> ConcentrationReport:
    if replicates < 1000:
        raise ValueError("replicates must be >= 1000")
    batch = sample_embedded_paths(p, start_time, int(max(n_grid)), replicates, rng, **kw)
    return concentration_report(batch, n_grid, eps)
