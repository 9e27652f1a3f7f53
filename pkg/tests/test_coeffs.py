import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammaln, poch

from erwlab import coeffs
from erwlab.errors import RegimeError

P_GRID = (0.0, 0.1, 0.25, 0.5, 0.6, 0.74)
ps = st.floats(min_value=0.0, max_value=0.7499, allow_nan=False)

SLOW_P = pytest.param(0.74, marks=pytest.mark.xfail(
    strict=True, reason="at p=0.74 the corrections decay like n^(4p-3) = n^-0.04; "
    "the 10^4..10^6 window is far from the asymptotic regime"))


def oracle_a(p, n):
    # independent oracle: a_n = Gamma(n) / Gamma(n + 2p - 1) = 1 / (n)_{2p-1}
    return 1.0 / poch(n, 2 * p - 1)


def test_param_regime():
    with pytest.raises(RegimeError):
        coeffs.MemoryParam(0.75)
    with pytest.raises(ValueError):
        coeffs.MemoryParam(-0.1)
    assert coeffs.MemoryParam(0.9, demo=True).p == 0.9
    assert coeffs.MemoryParam(0.25).beta == pytest.approx(2.0)


@pytest.mark.parametrize("p,n,expected", [
    (0.5, 17, 1.0),
    (0.0, 5, 4.0),
    (0.25, 2, 2 / math.sqrt(math.pi)),
])
def test_coeff_a_examples(p, n, expected):
    assert coeffs.coeff_a(p, n) == pytest.approx(expected, rel=1e-13)


def test_coeff_a_pochhammer_oracle():
    for p in (0.1, 0.25, 0.6, 0.74):
        for n in (1, 2, 3, 10, 1000, 10**5):
            assert coeffs.coeff_a(p, n) == pytest.approx(oracle_a(p, n), rel=1e-10)


@pytest.mark.parametrize("p,n,expected", [
    (0.5, 7, 7.0),
    (0.0, 3, 5.0),
    (0.25, 2, 5 / math.pi),
])
def test_coeff_A_examples(p, n, expected):
    assert coeffs.coeff_A(p, n) == pytest.approx(expected, rel=1e-13)


def test_asymptotic_examples():
    assert coeffs.asymptotic_a(0.5, 1000) == 1.0
    assert coeffs.asymptotic_A(0.5, 1000) == 1000.0
    assert coeffs.asymptotic_A(0.25, 16) == 128.0


def test_t1_constant_examples():
    assert coeffs.t1_constant(0.5) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-13)
    assert coeffs.t1_constant(0.25) == pytest.approx(2 / math.pi, rel=1e-13)
    oracle = math.exp(-gammaln(1.2)) * math.sqrt(1.2 / math.pi)
    assert coeffs.t1_constant(0.6) == pytest.approx(oracle, rel=1e-13)
    with pytest.raises(ValueError):
        coeffs.t1_constant(0.0)


@pytest.mark.parametrize("p", P_GRID)
def test_sequence_invariants(p):
    seq = coeffs.sequence(p)
    a = seq.a_upto(5000)
    A = seq.A_upto(5000)
    assert a[0] == 0.0
    if p == 0.0:
        assert a[1] == 0.0
    n = np.arange(1, 5000, dtype=float)
    np.testing.assert_allclose(a[2:] * (n + 2 * p - 1), a[1:-1] * n, rtol=1e-12, atol=0)
    # cumulative sums round at the scale of A itself
    assert np.all(np.abs(np.diff(A) - a[1:] ** 2) <= 4e-16 * A[1:])
    assert np.all(a[2:] > 0)


def test_arrays_read_only():
    a = coeffs.sequence(0.3).a_upto(10)
    with pytest.raises(ValueError):
        a[3] = 1.0


@settings(max_examples=60, deadline=None)
@given(p=ps, n=st.integers(min_value=1, max_value=20000))
def test_recurrence_property(p, n):
    a1, a2 = coeffs.coeff_a(p, n), coeffs.coeff_a(p, n + 1)
    # (n - 1) + 2p keeps the tiny-p factor exact at n = 1
    assert a2 * ((n - 1) + 2 * p) == pytest.approx(a1 * n, rel=1e-12, abs=1e-300)
    if n >= 2:
        assert a1 == pytest.approx(oracle_a(p, n), rel=1e-10)


@pytest.mark.parametrize("p", P_GRID)
def test_stirling(p):
    n = np.arange(1000, 10**5, 997)
    a = coeffs.sequence(p).a_upto(int(n.max()))[n]
    assert np.max(np.abs(a * n ** (2 * p - 1.0) - 1.0)) <= 0.01


def _tables(p, n):
    seq = coeffs.sequence(p)
    return seq.a_upto(n), seq.A_upto(n)


@pytest.mark.parametrize("p", [0.0, 0.1, 0.25, 0.5, 0.6, SLOW_P])
def test_prefix_sum_convergence(p):
    _, A = _tables(p, 10**6)
    n = np.arange(10**4, 10**6 + 1)
    b = 3 - 4 * p
    assert np.max(np.abs(A[n] * b / n**b - 1.0)) <= 0.02


@pytest.mark.parametrize("p", P_GRID)
def test_lower_bound_property(p):
    _, A = _tables(p, 3 * 10**4 + 1)
    b = 3 - 4 * p
    worst = np.inf
    for n in np.unique(np.geomspace(1, 10**4, 60).astype(int)):
        k = np.arange(0, 2 * n + 1)
        if p == 0.0 and n == 1:
            k = k[1:]  # a_1 = 0 makes A_1 - A_0 vanish
        worst = min(worst, np.min((A[k + n] - A[k]) / (n + k) ** b))
    assert worst > 0


@pytest.mark.parametrize("p", [0.0, 0.1, 0.25, 0.5, 0.6, SLOW_P])
def test_divergence_property(p):
    a, A = _tables(p, 10**5 + 10**4 + 1)
    k = np.arange(1 if p == 0.0 else 0, 10**5 + 1)
    big = np.min((A[k + 10**4] - A[k]) / a[k + 1] ** 2)
    small = np.min((A[k + 100] - A[k]) / a[k + 1] ** 2)
    assert big >= 10 * small


def test_increment_ratio_matches_definition():
    seq = coeffs.sequence(0.6)
    assert coeffs.increment_ratio(0.6, 4, 50) == pytest.approx(
        (seq.A(54) - seq.A(4)) / seq.a(5) ** 2, rel=1e-14)


def test_lookup_validation():
    seq = coeffs.sequence(0.3)
    with pytest.raises(ValueError):
        seq.a(-1)
