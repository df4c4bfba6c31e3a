import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from empnull.errors import DomainError
from empnull.levels import ConfidenceVector
from empnull.screening import (
    NEGATIVE,
    NOCALL,
    POSITIVE,
    LossParams,
    brute_force_decisions,
    expected_loss,
    optimize_decisions,
    poisson_binomial_pmf,
    threshold_rule,
)

import oracles


def cv(levels):
    return ConfidenceVector.from_levels(levels)


class TestExpectedLoss:
    def test_no_decisions(self):
        for a in (0, 0.5, 2):
            assert expected_loss([], 7, LossParams(a=a, c=3.0)) == 7

    def test_quadratic_two_features(self):
        # E[M^2] = 0.003004 from enumeration of the four outcomes
        assert oracles.poisson_binomial_moment([0.001, 0.002], 2) == pytest.approx(0.003004, abs=1e-15)
        assert expected_loss([0.001, 0.002], 1, LossParams(a=1, c=9)) == pytest.approx(1.027036, abs=1e-12)

    def test_additive_exact(self):
        assert expected_loss([0.1, 0.2], 0, LossParams(a=0, c=9)) == pytest.approx(2.7, abs=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            expected_loss([0.1, 1.2], 0, LossParams(a=1))

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
    def test_exact_branch_matches_enumeration(self, a):
        e = np.random.default_rng(int(a * 10)).uniform(0, 0.5, 12)
        got = expected_loss(e, 3, LossParams(a=a, c=2.0))
        assert got == pytest.approx(2.0 * oracles.poisson_binomial_moment(e, 1 + a) + 3, rel=1e-12)

    def test_monte_carlo_branch_close_to_exact(self):
        e = np.random.default_rng(5).uniform(0, 0.2, 40)
        params = LossParams(a=1.0, c=1.0, n_mc=20_000)
        mc = expected_loss(e, 0, params)
        pmf = poisson_binomial_pmf(e)
        exact = float(np.dot(pmf, np.arange(len(pmf)) ** 2.0))
        var = float(np.dot(pmf, np.arange(len(pmf)) ** 4.0)) - exact**2
        assert abs(mc - exact) < 4 * np.sqrt(var / params.n_mc)

    def test_monte_carlo_is_seeded(self):
        e = np.full(30, 0.1)
        p1 = LossParams(a=1.0, n_mc=500, seed=1)
        assert expected_loss(e, 0, p1) == expected_loss(e, 0, p1)
        assert expected_loss(e, 0, p1) != expected_loss(e, 0, LossParams(a=1.0, n_mc=500, seed=2))

    def test_pmf_sums_to_one(self):
        pmf = poisson_binomial_pmf(np.linspace(0, 1, 17))
        assert pmf.sum() == pytest.approx(1.0, abs=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=8))
    def test_monotone_in_acceleration(self, e):
        if max(e) == 0:
            return
        vals = [expected_loss(e, 0, LossParams(a=a, c=1.0)) for a in (0, 0.25, 0.5, 1, 2, 3)]
        assert all(y >= x - 1e-12 for x, y in zip(vals, vals[1:]))


class TestOptimize:
    def test_all_half_never_called(self):
        for a in (0, 1):
            r = optimize_decisions(cv(np.full(6, 0.5)), LossParams(a=a, c=9))
            assert r.action == [NOCALL] * 6
            assert r.expected_loss == 6

    def test_additive_threshold_example(self):
        r = optimize_decisions(cv([0.999, 0.95, 0.6]), LossParams(a=0, c=9))
        assert r.action == [NEGATIVE, NEGATIVE, NOCALL]
        assert r.n_decisions == 2

    def test_accelerated_example(self):
        lv = cv([0.999, 0.998, 0.6])
        r = optimize_decisions(lv, LossParams(a=1, c=9))
        assert r.action == [NEGATIVE, NEGATIVE, NOCALL]
        assert r.expected_loss == pytest.approx(1.027036, abs=1e-12)
        assert brute_force_decisions(lv, LossParams(a=1, c=9)).action == r.action

    def test_direction_follows_confidence(self):
        r = optimize_decisions(cv([0.001, 0.9999, 0.4]), LossParams(a=0, c=9))
        assert r.action == [POSITIVE, NEGATIVE, NOCALL]

    def test_excluded_never_called(self):
        lv = cv([np.nan, 0.9999, 0.0])
        r = optimize_decisions(lv, LossParams(a=0, c=9))
        assert r.action == [NOCALL, NEGATIVE, NOCALL]
        assert r.expected_loss == pytest.approx(9 * 0.0001 + 2)

    def test_decided_set_is_prefix(self):
        p = np.random.default_rng(9).uniform(size=300)
        r = optimize_decisions(cv(p), LossParams(a=1, c=9, n_mc=200))
        e = np.minimum(p, 1 - p)
        called = np.array([a != NOCALL for a in r.action])
        if called.any() and (~called).any():
            assert e[called].max() <= e[~called].min()

    def test_ties_resolved_to_fewer_calls(self):
        # c * e = 1 exactly: calling or not costs the same
        r = optimize_decisions(cv([0.75, 0.75]), LossParams(a=0, c=4))
        assert r.action == [NOCALL, NOCALL]

    def test_deterministic(self, screening_fixture):
        params = LossParams(a=0.5, c=9, n_mc=300, seed=4)
        r1 = optimize_decisions(screening_fixture, params)
        r2 = optimize_decisions(screening_fixture, params, threads=3)
        assert r1.action == r2.action
        assert r1.expected_loss == r2.expected_loss

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=0, max_size=200))
    def test_additive_equals_threshold_rule(self, levels):
        lv = cv(levels)
        assert optimize_decisions(lv, LossParams(a=0, c=9)).action == threshold_rule(lv, 9)


class TestBruteForce:
    def test_single(self):
        r = brute_force_decisions(cv([0.999]), LossParams(a=0, c=9))
        assert r.action == [NEGATIVE]
        assert r.expected_loss == pytest.approx(0.009, abs=1e-15)

    def test_empty(self):
        r = brute_force_decisions(cv([]), LossParams())
        assert r.action == [] and r.expected_loss == 0

    def test_size_limit(self):
        with pytest.raises(DomainError):
            brute_force_decisions(cv(np.full(13, 0.9)), LossParams())

    @pytest.mark.parametrize("seed", range(6))
    def test_agrees_with_pure_python_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        p = rng.uniform(size=4)
        a = [0, 0.5, 1, 2][seed % 4]
        r = brute_force_decisions(cv(p), LossParams(a=a, c=9))
        assert r.expected_loss == pytest.approx(oracles.brute_force_loss(list(p), a, 9), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.001, max_value=0.999), min_size=0, max_size=6),
        st.sampled_from([0, 0.5, 1, 2]),
        st.sampled_from([1.5, 4.0, 9.0, 30.0]),
    )
    def test_prefix_search_is_optimal(self, levels, a, c):
        lv = cv(levels)
        params = LossParams(a=a, c=c)
        assert optimize_decisions(lv, params).expected_loss == pytest.approx(
            brute_force_decisions(lv, params).expected_loss, abs=1e-12
        )


def test_loss_params_validation():
    with pytest.raises(DomainError):
        LossParams(a=-1)
    with pytest.raises(DomainError):
        LossParams(c=0)
    with pytest.raises(DomainError):
        LossParams(n_mc=0)
    assert LossParams().n_mc == 10_000
