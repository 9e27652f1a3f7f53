"""Survival curves, tail fits, normalised return statistics and KS harnesses."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .coeffs import as_param, sequence
from .exact import MAX_HORIZON, ExactTable, exact_table
from .rng import as_generator
from .limits import mean_H, sample_eta_levels, sample_H_levels
from .walk import ReturnSamples, zero_counts, zero_times

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def fit_loglog(x, y, se=None):
    """Least squares of log y on log x; weighted by (y/se)^2 when ``se`` is given.

    Returns (slope, intercept, standard error of the slope).  Points with
    zero ``se`` make the weights meaningless, so all-zero ``se`` (exact
    data) falls back to ordinary least squares.
    """
    lx = np.log(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    ly = np.log(y)
    if se is None or np.all(np.asarray(se) == 0):
        w = np.ones_like(lx)
    else:
        se = np.asarray(se, dtype=float)
        if np.any(se <= 0):
            raise ValueError("standard errors must all be positive for a weighted fit")
        w = (y / se) ** 2
    W = w.sum()
    mx, my = (w * lx).sum() / W, (w * ly).sum() / W
    sxx = (w * (lx - mx) ** 2).sum()
    slope = (w * (lx - mx) * (ly - my)).sum() / sxx
    intercept = my - slope * mx
    resid = ly - intercept - slope * lx
    dof = lx.size - 2
    if se is None or np.all(np.asarray(se) == 0):
        s2 = (resid ** 2).sum() / dof if dof > 0 else 0.0
        se_slope = math.sqrt(s2 / sxx)
    else:
        se_slope = math.sqrt(1.0 / sxx)
    return float(slope), float(intercept), float(se_slope)


@dataclass(frozen=True, eq=False)
class TailEstimate:
    n_grid: np.ndarray
    survival: np.ndarray
    se: np.ndarray
    censored_fraction: float
    cap: int | None = None
    fitted_slope: float = math.nan
    fitted_intercept: float = math.nan
    slope_se: float = math.nan
    fit_window: tuple = field(default=(None, None))

    def __post_init__(self):
        if np.any(np.diff(self.survival) > 1e-15):
            raise ValueError("survival must be non-increasing")
        if np.any(self.se < 0):
            raise ValueError("standard errors must be non-negative")


def survival_curve(samples: ReturnSamples, n_grid) -> TailEstimate:
    """Empirical P(R > n) with binomial standard errors; censored rows count as > cap."""
    if len(samples) == 0:
        raise ValueError("no samples")
    n_grid = np.asarray(n_grid, dtype=np.int64)
    if np.any(n_grid > samples.cap):
        raise ValueError("grid points must not exceed the censoring cap")
    cens = np.asarray(samples.censored, dtype=bool)
    vals = np.sort(samples.values[~cens])
    m = samples.values.size
    # a censored row has R > cap >= every grid point
    above = (vals.size - np.searchsorted(vals, n_grid, side="right")) + np.count_nonzero(cens)
    surv = above / m
    se = np.sqrt(surv * (1.0 - surv) / m)
    return TailEstimate(n_grid, surv, se, float(samples.censored.mean()), samples.cap)


def survival_from_table(table: ExactTable, n_grid) -> TailEstimate:
    """Exact P_k(R > n) from a killed table (standard errors are zero)."""
    if not table.killed_at_zero:
        raise ValueError("survival needs a killed table")
    n_grid = np.asarray(n_grid, dtype=np.int64)
    surv = np.asarray(table.survival)[n_grid]
    return TailEstimate(n_grid, surv, np.zeros_like(surv), 0.0, table.horizon)


def fit_tail_exponent(estimate: TailEstimate, window=None) -> TailEstimate:
    """Fit log P(R > n) against log n; expected slope 2p - 3/2.

    Only grid points inside ``window`` (inclusive) and below the censoring
    cap are used.  Returns a copy of ``estimate`` with the fit filled in.
    """
    n = estimate.n_grid
    lo, hi = window if window is not None else (n.min(), n.max())
    sel = (n >= lo) & (n <= hi) & (estimate.survival > 0)
    if estimate.cap is not None and estimate.censored_fraction > 0:
        sel &= n < estimate.cap
    if np.count_nonzero(sel) < 4:
        raise ValueError("need at least 4 grid points with positive survival in the window")
    se = estimate.se[sel]
    slope, icept, sse = fit_loglog(n[sel], estimate.survival[sel],
                                   se if np.all(se > 0) else None)
    return TailEstimate(estimate.n_grid, estimate.survival, estimate.se,
                        estimate.censored_fraction, estimate.cap, slope, icept, sse,
                        (int(lo), int(hi)))


@dataclass(frozen=True)
class TheoremT1Stat:
    """sqrt(A_{n+k} - A_k) / a_{k+1} * P_k(R > n); the limit is sqrt(2/pi)."""

    p: float
    k: int
    n: int
    value: float
    se: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("statistic must be non-negative")

    def within(self, rel: float, n_se: float = 0.0, target: float = SQRT_2_OVER_PI) -> bool:
        return abs(self.value - target) <= n_se * self.se + rel * target


def t1_factor(p, k: int, n: int) -> float:
    seq = sequence(p)
    return math.sqrt(seq.A(n + k) - seq.A(k)) / seq.a(k + 1)


def t1_statistic(p, k: int, n: int, survival_value: float, se: float = 0.0) -> TheoremT1Stat:
    mp = as_param(p)
    if n < 2:
        raise ValueError("n must be >= 2")
    if k < 0 or k % 2:
        raise ValueError("k must be an even non-negative integer")
    if mp.p == 0.0 and k < 2:
        raise ValueError("p = 0 needs k >= 2")
    f = t1_factor(mp, k, n)
    return TheoremT1Stat(mp.p, k, n, f * survival_value, f * se)


@dataclass(frozen=True)
class ZerosScaling:
    p: float
    n: int
    mean: float
    se: float
    exact: float | None
    target: float


def exact_zero_mean(p, n: int, k: int = 0) -> float:
    """E Z(n) / sqrt(n) from an unkilled table."""
    tab = exact_table(p, k, n, False, keep_mass=False)
    return tab.expected_zeros(n) / math.sqrt(n)


def zeros_scaling_statistic(p, n: int, replicates: int, rng=None, *, exact: bool = True,
                            backend=None) -> ZerosScaling:
    """Monte Carlo mean of Z(n)/sqrt(n) with its exact companion when n <= 2^14."""
    mp = as_param(p)
    if replicates < 1000:
        raise ValueError("replicates must be >= 1000")
    z = zero_counts(mp, 0, [n], replicates, rng, backend=backend)[:, 0] / math.sqrt(n)
    ex = exact_zero_mean(mp, n) if exact and n <= MAX_HORIZON else None
    return ZerosScaling(mp.p, n, float(z.mean()), float(z.std(ddof=1) / math.sqrt(z.size)),
                        ex, mean_H(mp, 1.0))


@dataclass(frozen=True)
class KSReport:
    statistic: float
    pvalue: float
    critical: float
    allowance: float | None
    passed: bool
    note: str = ""


def ks_critical(n1: int, n2: int, alpha: float = 1e-3) -> float:
    """Asymptotic two-sample KS critical distance."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n1 + n2) / (n1 * n2))


def ks_report(a, b, alpha: float = 1e-3, allowance: float | None = None,
              note: str = "") -> KSReport:
    """Two-sample KS; passes below the critical value, or below ``allowance`` if given."""
    res = sps.ks_2samp(a, b)
    crit = ks_critical(len(a), len(b), alpha)
    limit = crit if allowance is None else allowance
    return KSReport(float(res.statistic), float(res.pvalue), crit, allowance,
                    bool(res.statistic <= limit), note)


def distributional_check_H(p, n: int, replicates: int, rng=None,
                           grid_step: float | None = None, allowance: float = 0.03,
                           *, backend=None) -> KSReport:
    """KS distance between Z(n)/sqrt(n) from the walk and H(1) from the limit sampler."""
    mp = as_param(p)
    if replicates < 1000:
        raise ValueError("replicates must be >= 1000")
    rng_walk, rng_lim = _split(rng)
    z = zero_counts(mp, 0, [n], replicates, rng_walk, backend=backend)[:, 0] / math.sqrt(n)
    h = sample_H_levels(mp, [1.0], replicates, rng_lim, grid_step, backend=backend)[:, 0]
    return ks_report(z, h, allowance=allowance)


def _split(rng):
    # two independent generators from one seed-like argument
    if isinstance(rng, (list, tuple)):
        raise TypeError("pass a generator or seed; it is split into two streams")
    gen = as_generator(rng)
    a, b = gen.spawn(2)
    return a, b


@dataclass(frozen=True, eq=False)
class ChainScaling:
    p: float
    n: int
    t_grid: np.ndarray
    reports: list
    quantiles: np.ndarray
    censor_level: float
    censored_fraction: np.ndarray
    note: str


def return_chain_scaling(p, n: int, t_grid, replicates: int, rng=None,
                         grid_step: float | None = None, budget: float = 1000.0,
                         *, backend=None) -> ChainScaling:
    """Marginals of n^-2 zeta(floor(n t)) against eta(t) for each t in ``t_grid``.

    zeta(j) is the time of the j-th zero of the walk from 0.  Walks stop
    after ``budget * n^2`` steps; both samples are censored at that level
    before the KS comparison and the censored fractions are reported.
    """
    mp = as_param(p)
    t = np.asarray(sorted(t_grid), dtype=float)
    counts = np.floor(n * t).astype(np.int64)
    max_steps = int(budget * n * n)
    level = max_steps / float(n * n)
    rng_walk, rng_lim = _split(rng)
    need = int(counts.max()) if counts.size else 0
    if need > 0:
        zt = zero_times(mp, 0, need, replicates, max_steps, rng_walk, backend=backend)
    else:
        zt = np.zeros((replicates, 0), np.int64)
    eta = sample_eta_levels(mp, t, replicates, rng_lim, grid_step, backend=backend)
    reports, quants, cens = [], [], []
    for i, c in enumerate(counts):
        if c == 0:
            walk = np.zeros(replicates)
        else:
            col = zt[:, c - 1].astype(float)
            walk = np.where(col < 0, np.inf, col / float(n * n))
        lim = eta[:, i]
        cw = np.minimum(walk, level)
        cl = np.minimum(lim, level)
        cens.append(float(np.mean(walk >= level)))
        note = "" if cens[-1] == 0 else f"censored at {level:g}"
        reports.append(ks_report(cw, cl, note=note))
        quants.append(np.quantile(cw, [0.25, 0.5, 0.75]))
    trunc = float(max(cens, default=0.0))
    note = "" if trunc == 0 else (
        f"walks truncated after {max_steps} steps; up to {trunc:.3%} censored")
    return ChainScaling(mp.p, n, t, reports, np.array(quants), level, np.array(cens), note)


@dataclass(frozen=True, eq=False)
class MeanReturnProxy:
    p: float
    horizons: np.ndarray
    values: np.ndarray
    increments: np.ndarray
    regime: str
    passed: bool


def mean_return_proxy(p, horizons=(2**8, 2**10, 2**12, 2**14), *,
                      stable_tol: float = 0.02, growth: float = 0.05) -> MeanReturnProxy:
    """Partial means E[R ^ N] from one killed table.

    For p < 1/4 (finite mean) the last two values must differ by less
    than ``stable_tol`` relative; otherwise each value must exceed the
    previous by more than ``growth``.
    """
    mp = as_param(p)
    hz = np.asarray(sorted(horizons), dtype=np.int64)
    tab = exact_table(mp, 0, int(hz[-1]), True, keep_mass=False)
    vals = np.array([tab.truncated_mean_return(int(h)) for h in hz])
    inc = vals[1:] / vals[:-1] - 1.0
    if mp.p < 0.25:
        regime, ok = "finite", bool(inc[-1] < stable_tol)
    else:
        regime, ok = "infinite", bool(np.all(inc > growth))
    return MeanReturnProxy(mp.p, hz, vals, inc, regime, ok)
