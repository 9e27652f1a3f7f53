"""Limit objects: the stable-1/2 inverse local time, H, its inverse eta, and Pi.

lambda is simulated on a uniform local-time grid u_i = i du with i.i.d.
increments du^2 / Z^2 (Laplace exponent sqrt(2q), so E L(t) = sqrt(2t/pi)).
With beta = 3 - 4p and gamma = (2p - 1) / beta,

    H(t)   = beta^(-1/2) * sum over cells with lambda_i <= t^beta of lambda_i^gamma du,
    eta(t) = lambda_i^(1/beta) at the first cell where that sum exceeds t,

the first cell using the exact integral of a linear ramp, du lambda_1^gamma / (1 + gamma).
For gamma < 0 the plain Riemann sum converges only like du^(1 + 2 gamma)
because lambda^gamma blows up at the origin; the kernels cancel that term
by Richardson extrapolation between the grids du and 2 du on the same path.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import kernels
from .coeffs import as_param
from .rng import as_generator, as_streams

GRID_STEP = 1e-3
MAX_CELLS = 10**8


def _params(mp):
    beta = mp.beta
    return beta, (2.0 * mp.p - 1.0) / beta


def richardson_ratio(gamma: float) -> float:
    """Ratio of the leading grid errors on du and 2 du: 2^min(1, 1 + 2 gamma)."""
    return 2.0 ** min(1.0, 1.0 + 2.0 * gamma)


def sample_stable_half(s: float, rng=None, size=None):
    """lambda(s) ~ s^2 / Z^2, the first passage of Brownian motion to level s."""
    if not s > 0:
        raise ValueError("s must be positive")
    z = as_generator(rng).standard_normal(size)
    return s * s / (z * z)


@dataclass(frozen=True, eq=False)
class SubordinatorPath:
    grid_step: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v[0] != 0.0 or np.any(np.diff(v) < 0):
            raise ValueError("values must start at 0 and be non-decreasing")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def local_time(self, t: float) -> float:
        """Grid estimate of L(t) = du * #{i >= 1 : lambda_i <= t}."""
        return self.grid_step * float(np.count_nonzero(self.values[1:] <= t))


def sample_subordinator(grid_step: float, cells: int, rng=None) -> SubordinatorPath:
    gen = as_generator(rng)
    z = gen.standard_normal(cells)
    vals = np.concatenate(([0.0], np.cumsum(grid_step * grid_step / (z * z))))
    return SubordinatorPath(grid_step, vals)


@dataclass(frozen=True)
class LimitSample:
    p: float
    t: float
    H_value: float
    eta_value: float | None = None


def _check_grid(grid_step):
    if not grid_step > 0:
        raise ValueError("grid step must be positive")


def sample_H_levels(p, t_values, replicates: int, rng=None, grid_step: float | None = None,
                    *, gamma: float | None = None, max_cells: int = MAX_CELLS,
                    backend=None) -> np.ndarray:
    """H(t) for every t in ``t_values`` along each path, shape (replicates, len).

    ``gamma`` overrides the integrand exponent (``gamma=0`` turns H into
    L(t^beta) / sqrt(beta)).  ``grid_step=None`` uses :func:`default_grid_step`.
    """
    mp = as_param(p)
    grid_step = default_grid_step(mp) if grid_step is None else grid_step
    _check_grid(grid_step)
    beta, g = _params(mp)
    g = g if gamma is None else float(gamma)
    t = np.asarray(t_values, dtype=float)
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("t values must be sorted and non-negative")
    levels = t ** beta
    gens = as_streams(rng, replicates)
    out = kernels.run("h_levels", gens, replicates, levels, g, float(grid_step),
                      richardson_ratio(g), int(max_cells), backend=backend)
    return out / math.sqrt(beta)


def sample_H(p, t: float, grid_step: float | None = None, rng=None, **kw) -> LimitSample:
    mp = as_param(p)
    h = sample_H_levels(mp, [t], 1, as_generator(rng), grid_step, **kw)[0, 0]
    return LimitSample(mp.p, float(t), float(h))


def sample_eta_levels(p, t_values, replicates: int, rng=None,
                      grid_step: float | None = None, *, max_cells: int = MAX_CELLS,
                      backend=None) -> np.ndarray:
    """eta(t) for every t in ``t_values`` along each path, shape (replicates, len)."""
    mp = as_param(p)
    grid_step = default_grid_step(mp) if grid_step is None else grid_step
    _check_grid(grid_step)
    beta, g = _params(mp)
    t = np.asarray(t_values, dtype=float)
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("t values must be sorted and non-negative")
    # eta(0) = 0; the kernel skips negative targets
    targets = np.where(t > 0, t * math.sqrt(beta), -1.0)
    gens = as_streams(rng, replicates)
    return kernels.run("eta_targets", gens, replicates, targets, g, float(grid_step),
                       richardson_ratio(g), 1.0 / beta, int(max_cells), backend=backend)


def sample_eta(p, t: float, grid_step: float | None = None, rng=None, **kw) -> float:
    return float(sample_eta_levels(p, [t], 1, as_generator(rng), grid_step, **kw)[0, 0])


def _coupled_H(gen, rows, level, gamma, du, chunk=4096):
    # extrapolated H on grids du and 2 du from one path of step du / 2;
    # sums with strides 1, 2 and 4 are read at multiples of four cells
    h = du / 2.0
    rich = richardson_ratio(gamma)
    sums = np.zeros((3, rows))
    lam = np.zeros(rows)
    idx = 0
    active = np.arange(rows)
    while active.size:
        z = gen.standard_normal((active.size, chunk))
        path = lam[active, None] + np.cumsum(h * h / (z * z), axis=1)
        cell = idx + 1 + np.arange(chunk)
        # last complete group of four cells below the level
        below = path <= level
        stop = np.where(below.all(axis=1), chunk,
                        np.argmin(below, axis=1))
        n_ok = (idx + stop) // 4 * 4 - idx
        for j, stride in enumerate((1, 2, 4)):
            on = cell % stride == 0
            w = np.where(cell == stride, 1.0 / (1.0 + gamma), 1.0) * on
            terms = path ** gamma * w
            mask = np.arange(chunk)[None, :] < n_ok[:, None]
            sums[j, active] += np.sum(np.where(mask, terms, 0.0), axis=1) * stride * h
        lam[active] = path[:, -1]
        idx += chunk
        active = active[lam[active] <= level]
    fine = (rich * sums[0] - sums[1]) / (rich - 1.0)
    coarse = (rich * sums[1] - sums[2]) / (rich - 1.0)
    return fine, coarse


@dataclass(frozen=True)
class GridCalibration:
    grid_step: float
    history: list
    converged: bool


def calibrate_grid_step(p, t: float = 1.0, pilot: int = 1000, start: float = GRID_STEP,
                        tol: float = 0.005, max_halvings: int = 6,
                        rng=None) -> GridCalibration:
    """Halve du until the mean of H(t) moves by < ``tol`` relative.

    Each comparison runs the fine and coarse grids on the same paths, so
    the relative change is measured without Monte Carlo noise of order
    pilot^(-1/2).
    """
    mp = as_param(p)
    gen = as_generator(rng)
    beta, g = _params(mp)
    du = start
    history = []
    for _ in range(max_halvings + 1):
        fine, coarse = _coupled_H(gen, pilot, t ** beta, g, du / 2.0)
        change = abs(fine.mean() - coarse.mean()) / coarse.mean()
        history.append((du, float(change)))
        if change < tol:
            return GridCalibration(du, history, True)
        du /= 2.0
    return GridCalibration(du, history, False)


@lru_cache(maxsize=64)
def _default_step(p: float) -> float:
    return calibrate_grid_step(p, rng=0).grid_step


def default_grid_step(p) -> float:
    """Calibrated grid step for H(1) with a fixed pilot seed (cached per p)."""
    return _default_step(as_param(p).p)


def mean_H(p, t: float) -> float:
    """E H(t) = sqrt((6 - 8p) t / pi)."""
    mp = as_param(p)
    if t < 0:
        raise ValueError("t must be non-negative")
    return math.sqrt((6.0 - 8.0 * mp.p) * t / math.pi)


def levy_density(p, x):
    """Density of Pi: sqrt(beta^3 / 2 pi) (e^(beta x) - 1)^(-3/2) e^(beta x)."""
    beta = as_param(p).beta
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    # e^(bx) (e^(bx) - 1)^(-3/2) = e^(-bx/2) (1 - e^(-bx))^(-3/2), finite for all x > 0
    val = math.sqrt(beta**3 / (2.0 * math.pi)) * np.exp(-0.5 * beta * x) \
        * (-np.expm1(-beta * x)) ** -1.5
    return val if val.ndim else float(val)


def levy_tail_integral(p) -> float:
    """Integral of (1 ^ x) Pi(dx) by quadrature.

    On (0, 1] the x^(-1/2) singularity is removed by x = v^2.
    """
    mp = as_param(p)
    near = integrate.quad(lambda v: 2.0 * v**3 * levy_density(mp, v * v), 0.0, 1.0,
                          epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    far = integrate.quad(lambda x: levy_density(mp, x), 1.0, np.inf,
                         epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return near + far


def time_change_integral(p) -> float:
    """sqrt((6 - 8p)/pi) * integral over (0, e - 1) of dt / ((1 + t) sqrt((1 + t)^beta - 1)).

    The t^(-1/2) endpoint behaviour is handed to QUADPACK's algebraic weight.
    """
    mp = as_param(p)
    beta = mp.beta

    def f(t):
        if t == 0.0:
            return 1.0 / math.sqrt(beta)
        return 1.0 / ((1.0 + t) * math.sqrt(math.expm1(beta * math.log1p(t)) / t))

    val = integrate.quad(f, 0.0, math.e - 1.0, weight="alg", wvar=(-0.5, 0.0),
                         epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return math.sqrt((6.0 - 8.0 * mp.p) / math.pi) * val
