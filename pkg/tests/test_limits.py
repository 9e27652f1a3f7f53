import math

import numpy as np
import pytest
from scipy import integrate, stats as sps

from erwlab import limits
from erwlab.rng import as_generator, stream, streams

ALPHA = 1e-3


def test_stable_half_laplace():
    lam = limits.sample_stable_half(1.0, as_generator(1), 10**6)
    v = np.exp(-0.5 * lam)
    assert abs(v.mean() - math.exp(-1.0)) <= 3 * v.std(ddof=1) / math.sqrt(v.size)


def test_stable_half_median():
    med = 1.0 / sps.norm.ppf(0.75) ** 2
    assert med == pytest.approx(2.1981, abs=1e-4)
    lam = limits.sample_stable_half(1.0, as_generator(2), 10**5)
    below = np.mean(lam <= med)
    assert abs(below - 0.5) <= 3 * 0.5 / math.sqrt(lam.size)


def test_stable_half_scaling():
    a = limits.sample_stable_half(3.0, as_generator(3), 10**5) / 9.0
    b = limits.sample_stable_half(1.0, as_generator(4), 10**5)
    assert sps.ks_2samp(a, b).pvalue > ALPHA
    with pytest.raises(ValueError):
        limits.sample_stable_half(0.0)


def test_subordinator_path():
    sp = limits.sample_subordinator(1e-2, 500, as_generator(5))
    assert sp.values[0] == 0.0 and np.all(np.diff(sp.values) >= 0)
    assert sp.local_time(0.0) == 0.0
    assert sp.local_time(np.inf) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        limits.SubordinatorPath(1e-2, [0.0, 2.0, 1.0])


def test_H_mean_p_half():
    h = limits.sample_H_levels(0.5, [1.0], 10**5, as_generator(6))[:, 0]
    assert abs(h.mean() - math.sqrt(2 / math.pi)) <= 3 * h.std(ddof=1) / math.sqrt(h.size)


def test_H_mean_p_quarter_fine_grid():
    h = limits.sample_H_levels(0.25, [1.0], 10**5, as_generator(7),
                               grid_step=limits.GRID_STEP / 4)[:, 0]
    assert abs(h.mean() - math.sqrt(4 / math.pi)) <= 3 * h.std(ddof=1) / math.sqrt(h.size)


@pytest.mark.slow
def test_H_default_grid_bias_within_calibration_tolerance():
    # the default step leaves a small negative bias for gamma < 0; it must stay
    # inside the 0.5% calibration tolerance
    h = limits.sample_H_levels(0.25, [1.0], 10**6, as_generator(8))[:, 0]
    assert abs(h.mean() / limits.mean_H(0.25, 1.0) - 1.0) <= 0.005


@pytest.mark.parametrize("p", [0.0, 0.3, 0.6])
def test_H_small_time(p):
    h = limits.sample_H_levels(p, [1e-8], 10**4, as_generator(9))[:, 0]
    assert np.mean(h <= 1e-3) >= 0.999


@pytest.mark.parametrize("p", [0.1, 0.5, 0.7])
def test_H_non_decreasing_in_t(p):
    t = [0.0, 0.1, 0.5, 1.0, 1.5, 3.0]
    h = limits.sample_H_levels(p, t, 2000, as_generator(10))
    assert np.all(h[:, 0] == 0.0)
    assert np.all(np.diff(h, axis=1) >= 0)


@pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.65])
def test_eta_of_H_exceeds_t(p):
    t = np.array([0.5, 1.0, 2.0])
    h = limits.sample_H_levels(p, t, 40, streams(11, 0, 40))
    for r in range(40):
        # nudge past the floating-point tie at exactly H(t)
        e = limits.sample_eta_levels(p, h[r] * (1 + 1e-9), 1, [stream(11, r)])[0]
        assert np.all(e >= t)


def test_H_with_zero_gamma_is_local_time():
    du = 1e-3
    h = limits.sample_H_levels(0.5, [1.0], 20, streams(12, 0, 20), grid_step=du,
                               gamma=0.0)[:, 0]
    for r in range(20):
        sp = limits.sample_subordinator(du, 20000, stream(12, r))
        assert abs(sp.local_time(1.0) - h[r]) <= du + 1e-12


def test_sample_H_single():
    s = limits.sample_H(0.4, 1.0, rng=as_generator(13))
    assert s.p == 0.4 and s.t == 1.0 and s.H_value > 0
    assert limits.sample_eta(0.4, 1.0, rng=as_generator(13)) > 0


@pytest.mark.parametrize("p", [0.25, 0.6])
def test_eta_scaling(p):
    a = limits.sample_eta_levels(p, [2.0], 10**5, as_generator(14))[:, 0] / 4.0
    b = limits.sample_eta_levels(p, [1.0], 10**5, as_generator(15))[:, 0]
    assert sps.ks_2samp(a, b).pvalue > ALPHA


def test_eta_p_half_is_stable():
    a = limits.sample_eta_levels(0.5, [1.0], 10**5, as_generator(16))[:, 0]
    b = limits.sample_stable_half(1.0, as_generator(17), 10**5)
    # grid discreteness: eta is read at even cells, 2 du = 2e-3 in local time
    assert sps.ks_2samp(a, b).statistic <= 0.01


def test_eta_at_zero():
    e = limits.sample_eta_levels(0.3, [0.0, 1.0], 100, as_generator(18))
    assert np.all(e[:, 0] == 0.0) and np.all(e[:, 1] > 0)


def test_grid_step_validation():
    with pytest.raises(ValueError):
        limits.sample_H_levels(0.3, [1.0], 10, grid_step=0.0)
    with pytest.raises(ValueError):
        limits.sample_H_levels(0.3, [1.0, 0.5], 10)


@pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 0.65])
def test_grid_calibration(p):
    cal = limits.calibrate_grid_step(p, rng=0)
    assert cal.converged
    assert cal.history[-1][1] < 0.005
    assert limits.default_grid_step(p) == cal.grid_step


def test_richardson_ratio():
    assert limits.richardson_ratio(0.0) == 2.0
    assert limits.richardson_ratio(0.5) == 2.0
    assert limits.richardson_ratio(-0.25) == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize("p,t,expected", [
    (0.5, 1.0, math.sqrt(2 / math.pi)),
    (0.0, 1.0, math.sqrt(6 / math.pi)),
    (0.3, 0.0, 0.0),
])
def test_mean_H_examples(p, t, expected):
    assert limits.mean_H(p, t) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("p", [0.1, 0.25, 0.5, 0.6])
def test_quadrature_identity(p):
    assert limits.levy_tail_integral(p) == pytest.approx(limits.time_change_integral(p),
                                                         abs=1e-8)


def test_quadrature_against_direct_integration():
    # brute-force oracle on a log grid, independent of the substitutions used inside
    p = 0.25
    f = lambda x: min(1.0, x) * limits.levy_density(p, x)
    direct = sum(integrate.quad(f, lo, hi, limit=200)[0]
                 for lo, hi in ((0, 1e-6), (1e-6, 1e-2), (1e-2, 1), (1, 10), (10, 200)))
    assert limits.levy_tail_integral(p) == pytest.approx(direct, rel=1e-7)


@pytest.mark.parametrize("p", [0.0, 0.25, 0.6, 0.74])
def test_levy_density_asymptotics(p):
    b = 3 - 4 * p
    # the correction is ~1.5 exp(-b x); at p = 0.74 (b = 0.04) x = 40 is not large
    x = 40.0 if b * 40.0 > 20 else 40.0 / b
    big = limits.levy_density(p, x) * math.exp(b * x / 2)
    assert big == pytest.approx(math.sqrt(b**3 / (2 * math.pi)), rel=1e-6)
    x = 1e-8
    small = limits.levy_density(p, x) * x**1.5
    assert small == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-6)
    with pytest.raises(ValueError):
        limits.levy_density(p, 0.0)
