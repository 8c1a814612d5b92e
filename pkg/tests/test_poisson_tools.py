"""Poisson bookkeeping: bound arithmetic and total-variation distances."""

import math

import numpy as np
import pytest
from scipy.stats import poisson

from treetops.field_model import ModelParams
from treetops.poisson_tools import ChenSteinInput, avoidance_gap_budget, chen_stein_bound, tv_poisson


def test_bound_example():
    # mu = 1, N = 16, m = 4, no pair term: 2^-16 + 2^-4 exactly
    inp = ChenSteinInput(log2_n_configs=16.0, mu_n=1.0, pair_term=0.0)
    got = chen_stein_bound(inp, ModelParams(4, 4))
    assert got == 0.0625152587890625


def test_bound_composition():
    inp = ChenSteinInput(log2_n_configs=20.0, mu_n=1.5, pair_term=0.07, pair_term_se=0.01)
    got = chen_stein_bound(inp, ModelParams(4, 5))
    expect = math.ldexp(2.25, -20) + math.ldexp(2.25, -5) + 0.07
    assert got == expect


def test_bound_exact_at_extreme_sizes():
    # ldexp keeps 2^-N exact where 2.0**-N via pow would round identically
    # but float conversion of 2**N overflows; go big to prove it
    inp = ChenSteinInput(log2_n_configs=2048.0, mu_n=1.0, pair_term=0.0)
    got = chen_stein_bound(inp, ModelParams(2, 1024))
    assert got == math.ldexp(1.0, -1024)


def test_bound_size_mismatch():
    inp = ChenSteinInput(log2_n_configs=16.0, mu_n=1.0, pair_term=0.0)
    with pytest.raises(ValueError):
        chen_stein_bound(inp, ModelParams(4, 5))


def test_input_validation():
    with pytest.raises(ValueError):
        ChenSteinInput(log2_n_configs=-1.0, mu_n=1.0, pair_term=0.0)
    with pytest.raises(ValueError):
        ChenSteinInput(log2_n_configs=8.0, mu_n=-0.1, pair_term=0.0)
    with pytest.raises(ValueError):
        ChenSteinInput(log2_n_configs=8.0, mu_n=1.0, pair_term=-0.1)


def test_tv_against_direct_sum():
    # 20-point grid in [0, 10]^2, oracle = truncated direct summation
    k = np.arange(0, 201)
    lams1 = [0.0, 0.5, 1.0, 2.7, 10.0]
    lams2 = [0.0, 0.3, 1.0, 5.0]
    for l1 in lams1:
        for l2 in lams2:
            direct = 0.5 * np.abs(poisson.pmf(k, l1) - poisson.pmf(k, l2)).sum()
            assert abs(tv_poisson(l1, l2) - direct) < 1e-12, (l1, l2)


def test_tv_identity_and_symmetry():
    assert tv_poisson(3.3, 3.3) == 0.0
    for l1, l2 in [(0.1, 4.0), (2.0, 2.5), (0.0, 1.0)]:
        assert tv_poisson(l1, l2) == tv_poisson(l2, l1)


def test_tv_zero_intensity():
    # Poisson(0) is the point mass at 0, so tv = 1 - e^-lam
    for lam in (0.5, 1.0, 7.0):
        assert np.isclose(tv_poisson(0.0, lam), 1.0 - math.exp(-lam), rtol=1e-13)


def test_tv_triangle_inequality():
    grid = [0.0, 0.4, 1.1, 3.0, 8.5]
    for a in grid:
        for b in grid:
            for c in grid:
                assert tv_poisson(a, c) <= tv_poisson(a, b) + tv_poisson(b, c) + 1e-12


def test_tv_lipschitz_in_intensity():
    # tv(Poisson(l), Poisson(l+d)) <= d (coupling via an extra Poisson(d))
    rng = np.random.default_rng(0)
    for _ in range(50):
        lam = float(rng.uniform(0, 9))
        d = float(rng.uniform(0, 1))
        assert tv_poisson(lam, lam + d) <= d + 1e-12


def test_tv_bounds_and_validation():
    assert 0.0 <= tv_poisson(1.0, 9.0) <= 1.0
    with pytest.raises(ValueError):
        tv_poisson(-0.1, 1.0)
    with pytest.raises(ValueError):
        tv_poisson(1.0, math.inf)


def test_gap_budget_composition():
    cs = 0.01
    got = avoidance_gap_budget(1.2, 1.0967764203340924, cs)
    assert np.isclose(got, cs + tv_poisson(1.2, 1.0967764203340924), rtol=1e-15)
    # matched intensities: budget collapses to the dependence bound alone
    assert avoidance_gap_budget(2.0, 2.0, 0.03) == 0.03
    with pytest.raises(ValueError):
        avoidance_gap_budget(-1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        avoidance_gap_budget(1.0, 1.0, -0.5)
