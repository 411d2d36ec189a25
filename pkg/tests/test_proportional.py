import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from airs.exceptions import ConvergenceError, NotAnEquilibriumError
from airs.model import PiecewiseLinearCost, PowerCost
from airs.schemes import (airs_from_proportional, best_response, marginalize_scheme,
                          prop_equilibrium_closed_form, prop_equilibrium_numeric,
                          prop_foc_residuals, proportional_reward)

LINEAR = PowerCost(1.0)


class TestClosedForm:
    def test_symmetric(self):
        eq = prop_equilibrium_closed_form(1, 1, 1)
        np.testing.assert_allclose(eq.actions, [0.25, 0.25])
        assert eq.gross == pytest.approx(0.5)

    def test_asymmetric_gross(self):
        assert prop_equilibrium_closed_form(0.1, 10, 1).gross == pytest.approx(1 / 10.1)

    def test_zero_budget(self):
        eq = prop_equilibrium_closed_form(1, 1, 0)
        assert np.all(eq.actions == 0) and eq.spend == 0

    @given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100))
    def test_satisfies_foc(self, t1, t2, b):
        eq = prop_equilibrium_closed_form(t1, t2, b)
        res = prop_foc_residuals(eq.actions, 1 / eq.types, LINEAR, b)
        assert np.max(res) <= 1e-9 * max(1.0, b / eq.gross)


class TestNumeric:
    def test_symmetric_pair(self):
        eq = prop_equilibrium_numeric([1, 1], [1, 1], LINEAR, 1)
        np.testing.assert_allclose(eq.actions, [0.25, 0.25], atol=1e-6)

    def test_asymmetric_pair_matches_closed_form(self):
        t = np.array([0.1, 10.0])
        eq = prop_equilibrium_numeric(t, 1 / t, LINEAR, 1)
        np.testing.assert_allclose(eq.actions, prop_equilibrium_closed_form(0.1, 10, 1).actions,
                                   atol=1e-6)

    def test_three_symmetric(self):
        eq = prop_equilibrium_numeric([1, 1, 1], [1, 1, 1], LINEAR, 1)
        np.testing.assert_allclose(eq.actions, 2 / 9, atol=1e-9)

    def test_zero_budget(self):
        eq = prop_equilibrium_numeric([1, 1], [1, 1], LINEAR, 0)
        assert np.all(eq.actions == 0)

    def test_needs_two_agents(self):
        with pytest.raises(ValueError):
            prop_equilibrium_numeric([1], [1], LINEAR, 1)

    def test_best_response_method_agrees_when_it_converges(self):
        t = np.array([1.0, 2.0, 3.0])
        a = prop_equilibrium_numeric(t, 1 / t, PowerCost(2.0), 2.0)
        b = prop_equilibrium_numeric(t, 1 / t, PowerCost(2.0), 2.0, method="best_response")
        np.testing.assert_allclose(a.actions, b.actions, rtol=1e-8)

    def test_best_response_method_reports_nonconvergence(self):
        t = np.array([0.1, 10.0])
        with pytest.raises(ConvergenceError) as info:
            prop_equilibrium_numeric(t, 1 / t, LINEAR, 1, method="best_response",
                                     max_rounds=50, damping=1.0)
        assert info.value.result is not None

    def test_seeded_start_is_deterministic(self):
        t = np.array([1.0, 2.0])
        kw = dict(method="best_response", seed=7)
        a = prop_equilibrium_numeric(t, 1 / t, PowerCost(2.0), 1.0, **kw)
        b = prop_equilibrium_numeric(t, 1 / t, PowerCost(2.0), 1.0, **kw)
        np.testing.assert_array_equal(a.actions, b.actions)

    @given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100))
    def test_matches_closed_form(self, t1, t2, b):
        t = np.array([t1, t2])
        eq = prop_equilibrium_numeric(t, 1 / t, LINEAR, b)
        ref = prop_equilibrium_closed_form(t1, t2, b)
        np.testing.assert_allclose(eq.actions, ref.actions, rtol=1e-6, atol=1e-12)

    @given(st.integers(2, 8), st.integers(0, 2 ** 31), st.floats(1.0, 3.0))
    def test_foc_residuals_small(self, n, seed, a):
        t = np.sort(np.random.default_rng(seed).uniform(0.2, 5.0, n))
        eq = prop_equilibrium_numeric(t, 1 / t, PowerCost(a), 1.0)
        assert np.max(eq.foc_residuals) <= 1e-8 * max(1.0, 1.0 / eq.gross)

    def test_polyline_cost(self):
        c = PiecewiseLinearCost(np.array([0.5, 2.0]), np.array([0.2]))
        t = np.array([1.0, 1.5, 2.0])
        eq = prop_equilibrium_numeric(t, 1 / t, c, 1.0)
        assert np.max(eq.foc_residuals) <= 1e-8


class TestDominance:
    def test_symmetric_pair(self):
        dom = airs_from_proportional([0.25, 0.25], [1, 1], LINEAR, 1)
        assert dom.scheme.breakpoints.tolist() == [0.25]
        assert dom.scheme.rewards.tolist() == [0.25]
        assert dom.spend == pytest.approx(0.5)

    def test_asymmetric_pair(self):
        t = np.array([0.1, 10.0])
        eq = prop_equilibrium_closed_form(0.1, 10, 1)
        dom = airs_from_proportional(eq.actions, 1 / t, LINEAR, 1)
        assert dom.spend < 1
        np.testing.assert_allclose(dom.responses, eq.actions)

    def test_one_zero_action(self):
        # not an equilibrium (the active agent would shrink), so skip the FOC gate
        dom = airs_from_proportional([0.0, 1.0], [2.0, 0.25], LINEAR, 1.0, foc_tol=np.inf)
        assert dom.scheme.breakpoints.tolist() == [1.0]
        assert dom.responses.tolist() == [0.0, 1.0]

    def test_rejects_non_equilibrium(self):
        with pytest.raises(NotAnEquilibriumError):
            airs_from_proportional([0.1, 0.4], [1, 1], LINEAR, 1)

    @given(st.integers(2, 6), st.integers(0, 2 ** 31), st.floats(1.0, 3.0),
           st.floats(0.1, 10.0))
    def test_spend_and_preservation(self, n, seed, a, b):
        t = np.sort(np.random.default_rng(seed).uniform(0.2, 5.0, n))
        h, c = 1 / t, PowerCost(a)
        eq = prop_equilibrium_numeric(t, h, c, b)
        dom = airs_from_proportional(eq.actions, h, c, b)
        assert dom.spend <= b * (1 + 1e-9)
        for hi, xi in zip(h, eq.actions):
            assert best_response(dom.scheme, hi, c)[0] == pytest.approx(xi, rel=1e-9, abs=1e-12)


class TestMarginalize:
    def test_constant_in_opponents_has_zero_variance(self):
        def reward(profile, i):
            return 2.0 * profile[i]
        table = marginalize_scheme(reward, lambda rng, k: rng.uniform(size=k), np.array([0.5, 1.0]),
                                   n_agents=3, n_samples=100)
        np.testing.assert_allclose(table.rewards, [1.0, 2.0])
        np.testing.assert_allclose(table.stderr, 0.0, atol=1e-15)

    def test_proportional_fixed_opponent(self):
        table = marginalize_scheme(proportional_reward(1.0), lambda rng, k: np.full(k, 0.25),
                                   np.array([0.25]), n_agents=2, n_samples=10)
        assert table.rewards[0] == pytest.approx(0.5)

    def test_nondegenerate_sampler_reports_error(self):
        table = marginalize_scheme(proportional_reward(1.0), lambda rng, k: rng.uniform(0.1, 1, k),
                                   np.array([0.5]), n_agents=2, n_samples=10_000, seed=3)
        assert table.stderr[0] > 0

    def test_seeded_reproducible(self):
        kw = dict(reward_fn=proportional_reward(1.0), sampler=lambda rng, k: rng.uniform(size=k),
                  grid=np.array([0.3, 0.6]), n_agents=3, n_samples=500)
        a = marginalize_scheme(seed=11, **kw)
        b = marginalize_scheme(seed=11, **kw)
        np.testing.assert_array_equal(a.rewards, b.rewards)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            marginalize_scheme(proportional_reward(1.0), lambda rng, k: np.full(k, 0.5), np.array([0.5]),
                               n_agents=2, n_samples=1)
