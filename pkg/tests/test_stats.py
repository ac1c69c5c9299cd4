import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst
from scipy import integrate, stats as sps

from rlwe_forge import stats as st
from rlwe_forge.errors import EmptyBins, InsufficientSamples, NotADistribution


def test_statistic_basics():
    assert st.chi_square_statistic([10, 10], [10.0, 10.0]) == 0.0
    M = 84
    assert st.chi_square_statistic([M, 0], [M / 2, M / 2]) == M
    with pytest.raises(EmptyBins):
        st.chi_square_statistic([1, 2], [3.0, 0.0])


def test_cdf_bounds():
    assert st.chi_square_cdf(0.0, 5) == 0.0
    assert st.chi_square_cdf(1e9, 5) == 1.0


def test_cdf_against_scipy():
    for dof in (1, 2, 5, 49, 120, 250):
        for x in (0.01, 1.0, dof / 2, dof, 2 * dof, 10 * dof):
            assert abs(st.chi_square_cdf(x, dof) - sps.chi2.cdf(x, dof)) < 1e-12


def test_inv_cdf_quadrature_oracle():
    x95 = st.chi_square_inv_cdf(0.95, 1)
    assert abs(x95 - 3.8415) < 1e-3
    dens = lambda t: t ** (-0.5) * math.exp(-t / 2) / (2**0.5 * math.gamma(0.5))
    val, _ = integrate.quad(dens, 0, x95)
    assert abs(val - 0.95) < 1e-6


def test_inv_cdf_roundtrip():
    for alpha in (0.5, 0.9, 0.99):
        for dof in (1, 10, 100):
            x = st.chi_square_inv_cdf(alpha, dof)
            assert abs(st.chi_square_cdf(x, dof) - alpha) < 1e-9


def test_noncentral_reduces_to_central():
    for dof in (1, 10, 120):
        for x in (0.5, dof, 3 * dof):
            assert abs(st.noncentral_chi_square_cdf(x, dof, 0.0)
                       - st.chi_square_cdf(x, dof)) < 1e-14


def test_noncentral_monotone_in_lambda():
    x, dof = 30.0, 10
    vals = [st.noncentral_chi_square_cdf(x, dof, lam) for lam in (0, 1, 5, 20, 80)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_noncentral_against_scipy():
    for dof in (1, 10, 120, 250):
        for lam in (0.5, 10, 590, 4000):
            x = dof + lam
            assert abs(st.noncentral_chi_square_cdf(x, dof, lam)
                       - sps.ncx2.cdf(x, dof, lam)) < 1e-10


def test_noncentral_monte_carlo():
    rng = np.random.default_rng(7)
    draws = rng.noncentral_chisquare(10, 5.0, size=10_000_000)
    x = 15.0
    mc = float((draws <= x).mean())
    se = math.sqrt(mc * (1 - mc) / draws.size)
    assert abs(st.noncentral_chi_square_cdf(x, 10, 5.0) - mc) < 3 * se


def test_success_bound_degenerate_and_monotone():
    N, M, alpha = 10, 100, 0.9
    expect = 0.9**9 * (1 - 0.9)
    assert abs(st.success_lower_bound(N, M, 0.0, alpha) - expect) < 1e-9
    vals = [st.success_lower_bound(121, M, 0.3, 0.99) for M in (100, 300, 900, 2700)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
    alpha = 1 - 1 / (10 * 121)
    assert alpha ** (121 - 1) >= math.exp(-0.1)


def test_distances():
    P = np.full(10, 0.1)
    assert st.statistical_distance(P, P) == 0.0
    assert st.l2_distance(P, P) == 0.0
    point = np.zeros(10)
    point[0] = 1.0
    assert abs(st.statistical_distance(point, P) - (1 - 1 / 10)) < 1e-12
    with pytest.raises(NotADistribution):
        st.statistical_distance(np.full(10, 0.2), P)


def test_distance_inequality_on_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = rng.random(30)
        q = rng.random(30)
        d = st.statistical_distance(p / p.sum(), q / q.sum())
        d2 = st.l2_distance(p / p.sum(), q / q.sum())
        assert d <= math.sqrt(30) / 2 * d2 + 1e-12


def test_uniformity_gate():
    bins = st.per_element_bins(10, 20)  # expected mass 2 < 5
    with pytest.raises(InsufficientSamples):
        st.uniformity_test(np.zeros(20, dtype=int), bins, 0.99)


def test_two_bin_spec():
    spec = st.subfield_two_bins(67, 2, 22445)
    assert spec.r == 2
    assert abs(spec.expected[1] - 22445 * (67**2 - 67) / 67**2) < 1e-9
    assert abs(spec.expected.sum() - 22445) < 1e-9


def test_circle_bins_indexing():
    spec = st.circle_bins(50, 307.0, 1535)
    idx = spec.indexer(np.array([0.0, 306.9999, 153.5]))
    assert list(idx) == [0, 49, 25]


def test_null_calibration_small():
    rng = np.random.default_rng(12)
    rejections = 0
    trials = 200
    bins = st.per_element_bins(97, 10_000)
    for _ in range(trials):
        vals = rng.integers(0, 97, size=10_000)
        rejections += st.uniformity_test(vals, bins, 0.99).rejected
    assert 0 <= rejections / trials <= 0.03


def test_two_sample_null():
    rng = np.random.default_rng(3)
    c1 = np.bincount(rng.integers(0, 40, 20_000), minlength=40)
    c2 = np.bincount(rng.integers(0, 40, 20_000), minlength=40)
    r = st.two_sample_chi_square(c1, c2)
    assert r.p_value > 1e-3
    assert r.dof == 39


@settings(max_examples=30, deadline=None)
@given(hst.permutations(range(8)))
def test_statistic_permutation_invariance(perm):
    obs = np.array([5, 9, 14, 2, 7, 11, 3, 9], dtype=float)
    exp = np.full(8, obs.sum() / 8)
    perm = np.asarray(perm)
    assert math.isclose(st.chi_square_statistic(obs, exp),
                        st.chi_square_statistic(obs[perm], exp))


@settings(max_examples=25, deadline=None)
@given(hst.floats(min_value=0.01, max_value=0.99),
       hst.integers(min_value=1, max_value=300))
def test_inv_cdf_roundtrip_property(alpha, dof):
    x = st.chi_square_inv_cdf(alpha, dof)
    assert abs(st.chi_square_cdf(x, dof) - alpha) < 1e-8


def test_full_degree_count():
    assert st.full_degree_count(131, 2) == 131**2 - 131
    assert st.full_degree_count(7, 4) == 7**4 - 7**2
    assert st.full_degree_count(3, 6) == 3**6 - 3**3 - 3**2 + 3
