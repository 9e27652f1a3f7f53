import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from erwlab import embedding, walk
from erwlab.coeffs import sequence
from erwlab.rng import as_generator

ALPHA = 1e-3


def exit_tail(t, terms=200):
    # P(tau(1, 0) > t) from the eigenfunction series of the heat equation on (-1, 1)
    k = np.arange(terms)
    return float(np.sum(4 / math.pi * (-1.0) ** k / (2 * k + 1)
                        * np.exp(-(2 * k + 1) ** 2 * math.pi**2 * t / 8)))


def test_exit_interval_examples():
    pr = embedding.exit_interval(0.5, 10, 3, 5.0)
    assert pr.halfwidth == 1.0 and pr.start_offset == 0.0
    pr = embedding.exit_interval(0.25, 0, 1, 1 / math.sqrt(math.pi))
    assert pr.halfwidth == pytest.approx(2 / math.sqrt(math.pi), rel=1e-14)
    assert pr.start_offset == pytest.approx(-1 / math.sqrt(math.pi), rel=1e-14)
    assert abs(pr.start_offset) <= pr.halfwidth


def test_exit_interval_rejects():
    with pytest.raises(ValueError):
        embedding.exit_interval(0.25, 0, 3, 0.1234)  # off the lattice
    with pytest.raises(ValueError):
        embedding.exit_interval(0.25, 0, 2, 5 * sequence(0.25).a(2))  # |s| > t
    with pytest.raises(ValueError):
        embedding.exit_interval(0.0, 0, 1, 1.0)  # a_1 = 0 forces M = 0


@pytest.mark.parametrize("p,k,n,s,expected", [
    (0.5, 0, 9, 3, 0.5),
    (0.6, 0, 4, -2, 0.45),
    (0.3, 0, 1, 1, 0.3),
    (0.7, 0, 1, 1, 0.7),
])
def test_up_probability_examples(p, k, n, s, expected):
    assert embedding.embedded_up_probability(p, k, n, s) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(0.0, 0.7499), k=st.integers(0, 100).map(lambda x: 2 * x),
       n=st.integers(1, 300), data=st.data())
def test_up_probability_equals_step_law(p, k, n, data):
    t = k + n
    if p == 0.0 and t < 2:
        return  # a_1 = 0: the embedding carries no sign at t = 1
    s = data.draw(st.integers(-n, n).filter(lambda v: (v - n) % 2 == 0))
    got = embedding.embedded_up_probability(p, k, n, s)
    assert got == pytest.approx(walk.step_probability(p, t, s), abs=1e-12)


def test_exit_problem_validation():
    with pytest.raises(ValueError):
        embedding.ExitProblem(0.0, 0.0)
    with pytest.raises(ValueError):
        embedding.ExitProblem(1.0, 1.5)
    pr = embedding.ExitProblem(1.0, 1.0)
    assert pr.degenerate
    t, side = embedding.sample_exit(pr, as_generator(0))
    assert t == 0.0 and side == 1


@pytest.mark.parametrize("x,y", [(1.0, 0.0), (2.0, 1.0), (1.0, 0.9)])
@pytest.mark.parametrize("method", embedding.METHODS)
def test_mean_exit_time(x, y, method):
    t, sides, _ = embedding.sample_exits(embedding.ExitProblem(x, y), 10**5,
                                         as_generator(1), method)
    se = t.std(ddof=1) / math.sqrt(t.size)
    assert abs(t.mean() - (x * x - y * y)) <= 3 * se
    up = np.mean(sides > 0)
    q = (x + y) / (2 * x)
    assert abs(up - q) <= 3 * math.sqrt(q * (1 - q) / t.size)


def test_exit_tail_against_series():
    t, _, _ = embedding.sample_exits(embedding.ExitProblem(1.0, 0.0), 10**5,
                                     as_generator(2))
    for level in (0.5, 1.0, 2.0):
        q = exit_tail(level)
        assert abs(np.mean(t > level) - q) <= 3 * math.sqrt(q * (1 - q) / t.size) + 1e-3


def test_exit_time_distribution_ks():
    t, _, _ = embedding.sample_exits(embedding.ExitProblem(1.0, 0.0), 2 * 10**4,
                                     as_generator(3))
    cdf = np.vectorize(lambda v: 1.0 - exit_tail(v) if v > 0 else 0.0)
    # the series needs many terms close to zero; times below 0.05 have mass < 1e-9
    assert sps.kstest(t, cdf).pvalue > ALPHA


@pytest.mark.slow
def test_exit_resolution_calibration():
    res, history = embedding.calibrate_exit_resolution(as_generator(4), samples=10**6)
    assert res <= embedding.RESOLUTION
    (r0, m0), (r1, m1) = history[-2], history[-1]
    assert abs(m1 - m0) < 0.002 * m0


def test_embedded_path_p_half():
    batch = embedding.sample_embedded_paths(0.5, 0, 100, 10**4, as_generator(5))
    assert np.array_equal(batch.values, batch.positions.astype(float))
    assert np.all(batch.compensator == 0.0)
    tn = batch.times[:, 100]
    assert abs(tn.mean() - 100) <= 3 * tn.std(ddof=1) / 100


def test_mean_identity_p06():
    batch = embedding.sample_embedded_paths(0.6, 0, 1000, 1000, as_generator(6))
    m, target, se = embedding.mean_time_identity(batch)
    assert abs(m - target) <= 3 * se


def test_embedded_sign_law_chi_square():
    p, n, reps = 0.25, 6, 10**5
    batch = embedding.sample_embedded_paths(p, 0, n, reps, as_generator(7))
    steps = (np.diff(batch.positions, axis=1) > 0).astype(np.int64)
    codes = steps @ (1 << np.arange(n)[::-1])
    counts = np.bincount(codes, minlength=2**n)
    law = np.array([walk.sequence_probability(p, 0, [1 if b else -1 for b in bits])
                    for bits in itertools.product((0, 1), repeat=n)])
    assert sps.chisquare(counts, law * reps).pvalue > ALPHA


@pytest.mark.parametrize("p,k", [(0.25, 0), (0.6, 4), (0.0, 2), (0.7, 10)])
def test_embedded_path_invariants(p, k):
    n = 200
    batch = embedding.sample_embedded_paths(p, k, n, 50, as_generator(8))
    a = sequence(p).a_upto(k + n)
    assert np.allclose(batch.values, a[k:k + n + 1] * batch.positions, rtol=0, atol=0)
    assert np.all(np.diff(batch.times, axis=1) >= 0)
    j = np.arange(1, n)
    w = ((2 * p - 1) / (k + j + 2 * p - 1)) ** 2
    # V[m] sums j = 1 .. m - 1, so V[0] = V[1] = 0
    v = np.concatenate([np.zeros((50, 2)),
                        np.cumsum(w * batch.values[:, 1:n] ** 2, axis=1)], axis=1)
    assert np.allclose(batch.compensator, v, rtol=1e-12, atol=1e-12)
    assert np.all(batch.compensator >= 0)
    assert np.all(np.diff(batch.compensator, axis=1) >= 0)
    for path in (batch[0], batch[1]):
        assert path.steps == n and path.values.shape == (n + 1,)


def test_p0_needs_later_start():
    with pytest.raises(ValueError):
        embedding.sample_embedded_paths(0.0, 0, 10, 5, as_generator(0))
    with pytest.raises(ValueError):
        embedding.sample_embedded_paths(0.3, 3, 10, 5, as_generator(0))


def test_single_path_matches_batch_row():
    gens = [as_generator(9)]
    one = embedding.sample_embedded_path(0.35, 0, 30, as_generator(9))
    batch = embedding.sample_embedded_paths(0.35, 0, 30, 1, gens)
    assert np.array_equal(one.times, batch.times[0])


# shared n = 2^12 runs for the growth, concentration and law-of-large-numbers checks
N_BIG = 2**12
N_GRID = [2**j for j in range(6, 13)]


@pytest.fixture(scope="module")
def big_batches():
    cache = {}

    def get(p):
        if p not in cache:
            cache[p] = embedding.sample_embedded_paths(p, 0, N_BIG, 1000,
                                                       as_generator(100 + int(100 * p)))
        return cache[p]
    return get


def test_compensator_zero_at_half():
    rep = embedding.compensator_moment_check(0.5, 0, [8, 16, 32, 64], 1000, as_generator(10))
    assert np.all(rep.mean_v == 0.0) and rep.slope == 0.0 and rep.passed


@pytest.mark.slow
def test_compensator_growth_p025(big_batches):
    rep = embedding.compensator_report(big_batches(0.25), N_GRID)
    assert rep.slope <= 1.1 and rep.passed


@pytest.mark.slow
def test_compensator_bounded_p07(big_batches):
    batch = big_batches(0.7)
    v = batch.compensator
    assert v[:, 2**12].mean() / v[:, 2**8].mean() <= 1.2
    assert embedding.compensator_report(batch, N_GRID).passed


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="at eps = 0.5 the threshold n/2 is ~5 standard "
                   "deviations of T_n - n already at n = 64, so 10^3 paths see frequency 0 "
                   "at both ends of the grid")
def test_concentration_trend_p05(big_batches):
    rep = embedding.concentration_report(big_batches(0.5), N_GRID, 0.5)
    assert rep.frequency[-1] < rep.frequency[0]


def test_concentration_decay_p05_small_n():
    batch = embedding.sample_embedded_paths(0.5, 0, 256, 1000, as_generator(13))
    rep = embedding.concentration_report(batch, [2, 4, 8, 16, 32, 64, 128, 256], 0.5)
    assert rep.frequency[0] > 0.1 and rep.frequency[-1] < rep.frequency[0]
    assert rep.passed


@pytest.mark.slow
def test_concentration_small_p025(big_batches):
    rep = embedding.concentration_report(big_batches(0.25), N_GRID, 1.0)
    assert rep.frequency[-1] <= 0.05
    assert rep.passed


@pytest.mark.slow
def test_concentration_huge_eps(big_batches):
    rep = embedding.concentration_report(big_batches(0.25), N_GRID, 1e12)
    assert np.all(rep.frequency == 0.0)


@pytest.mark.slow
@pytest.mark.parametrize("p", [0.25, 0.5, 0.6])
def test_time_law_of_large_numbers(big_batches, p):
    batch = big_batches(p)
    ratio = batch.times[:, N_BIG] / sequence(p).A(N_BIG)
    assert 0.9 <= np.median(ratio) <= 1.1


@pytest.mark.slow
@pytest.mark.parametrize("p", [0.25, 0.5, 0.6, 0.7])
def test_zero_set_inclusion(big_batches, p):
    batch = big_batches(p)
    at_zero = batch.positions == 0
    assert np.all(batch.values[at_zero] == 0.0)
    assert np.all(batch.errors[at_zero] <= batch.tolerances[at_zero])


@pytest.mark.slow
def test_first_return_law_independent_of_start():
    cap = 128

    def scaled_return_times(k, seed):
        batch = embedding.sample_embedded_paths(0.5, k, cap, 10**4, as_generator(seed))
        hit = batch.positions[:, 1:] == 0
        first = np.where(hit.any(axis=1), hit.argmax(axis=1) + 1, -1)
        t = np.where(first > 0, batch.times[np.arange(len(batch)), first], np.inf)
        # censor both samples at the same level; a_{k+1} = 1 at p = 1/2
        return np.minimum(t, 1e6)

    a, b = scaled_return_times(0, 11), scaled_return_times(64, 12)
    assert sps.ks_2samp(a, b).pvalue > ALPHA
