import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orlicz_indiff import FiniteMarket, exponential_utility, maximize, minimize_dual, random_market
from orlicz_indiff.primal import exponential_log_value, logsumexp


def test_symmetric_two_state(two_state):
    sol = maximize(two_state, exponential_utility(1.0), 0.0, 0.0)
    assert sol.h_star == pytest.approx([0.0], abs=1e-12)
    assert sol.value == pytest.approx(-1.0, abs=1e-14)
    assert sol.gradient_residual <= 1e-10


def test_constant_claim_shifts_wealth(three_state):
    u = exponential_utility(1.5)
    a = maximize(three_state, u, 2.0, 0.5)
    b = maximize(three_state, u, 0.0, -1.5)
    assert a.value == pytest.approx(b.value, rel=1e-12)
    np.testing.assert_allclose(a.h_star, b.h_star, atol=1e-10)


@given(seed=st.integers(0, 5000), gamma=st.sampled_from([0.5, 1.0, 2.0]), x=st.floats(-3, 3))
def test_exponential_factorisation(seed, gamma, x):
    rng = np.random.default_rng(seed)
    m = random_market(rng, 4, 2)
    B = rng.uniform(-1, 1, 4)
    u = exponential_utility(gamma)
    v0 = maximize(m, u, B, 0.0).value
    vx = maximize(m, u, B, x).value
    assert vx == pytest.approx(math.exp(-gamma * x) * v0, rel=1e-10)


@given(seed=st.integers(0, 5000))
def test_value_below_saturation_and_stationary(seed):
    rng = np.random.default_rng(seed)
    m = random_market(rng, int(rng.integers(2, 7)), 1)
    sol = maximize(m, exponential_utility(1.0), rng.uniform(-1, 1, m.n_states), 0.0)
    assert sol.value < 0.0
    assert sol.gradient_residual <= 1e-8


def test_value_concave_nondecreasing_in_wealth(skewed_three_state):
    u = exponential_utility(1.0)
    B = np.array([1.0, -0.5, 0.2])
    xs = np.linspace(-2, 2, 21)
    v = np.array([maximize(skewed_three_state, u, B, x).value for x in xs])
    assert np.all(np.diff(v) > 0)
    assert np.all(np.diff(v, 2) <= 1e-12)


@given(seed=st.integers(0, 5000))
def test_budget_identity(seed):
    rng = np.random.default_rng(seed)
    m = random_market(rng, 5, 2)
    B = rng.uniform(-1, 1, 5)
    u = exponential_utility(1.0)
    sol = maximize(m, u, B, 0.3)
    q = minimize_dual(m, u, B, 0.3, compute_gap=False).q_star.q
    assert float(q @ (sol.f_B - 0.3)) == pytest.approx(0.0, abs=1e-8)


def test_degenerate_column_dropped():
    m = FiniteMarket([0.3, 0.3, 0.4], [[1.0, 0.0], [0.0, 0.0], [-0.75, 0.0]])
    with pytest.warns(UserWarning, match="dropping 1 asset"):
        sol = maximize(m, exponential_utility(1.0), 0.0, 0.0)
    assert sol.h_star[1] == 0.0
    assert sol.gradient_residual <= 1e-10


def test_log_domain_handles_huge_claims(two_state):
    # the plain value underflows to -inf scale; the log value stays finite
    _, log_v, _, _ = exponential_log_value(two_state.delta_s, two_state.probs, 1.0, np.array([1e4, 0.0]), 0.0)
    assert log_v == pytest.approx(0.5e4 + math.log(1.0), rel=1e-12)


def test_logsumexp():
    z = np.array([1000.0, 1000.0])
    assert logsumexp(z) == pytest.approx(1000.0 + math.log(2.0))
    assert logsumexp(z, b=np.array([0.25, 0.25])) == pytest.approx(1000.0 + math.log(0.5))


def test_loss_multiple_is_diagnostic(three_state):
    B = np.array([2.0, 0.0, -1.0])
    sol = maximize(three_state, exponential_utility(1.0), B, 0.0)
    gains = three_state.delta_s @ sol.h_star
    c = sol.loss_multiple
    assert c >= 0
    assert np.all(gains >= -c * three_state.loss_variable - 1e-12)
    assert c == pytest.approx(max(0.0, float((-gains / three_state.loss_variable).max())))
