import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orlicz_indiff import (
    DiscreteDistribution,
    ExpTailVariable,
    claim_admissible,
    conjugate,
    custom_utility,
    exponential_utility,
    luxemburg_norm,
    orlicz_dual_norm,
    young_pair,
)
from orlicz_indiff.utility import exp_moment_abscissa

GAMMAS = [0.5, 1.0, 2.0]


def neg_exp():
    return custom_utility(lambda x: -np.exp(-np.asarray(x, dtype=float)))


# ---------------------------------------------------------------- conjugate


def test_exponential_closed_forms():
    u = exponential_utility(1.0)
    assert conjugate(u, 1.0) == pytest.approx(-1.0, abs=1e-15)
    assert conjugate(u, 0.0) == 0.0
    assert u.u_infinity == 0.0
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(u.u_hat(x), np.exp(np.abs(x)) - 1, rtol=1e-14)


def test_custom_conjugate_matches_exponential():
    assert conjugate(neg_exp(), 1.0) == pytest.approx(-1.0, abs=1e-8)


@pytest.mark.parametrize("gamma", GAMMAS)
def test_phi_at_beta_is_u_zero(gamma):
    u = exponential_utility(gamma)
    assert u.phi(u.beta) == pytest.approx(float(u.u(0.0)), abs=1e-14)


@pytest.mark.parametrize("gamma", GAMMAS)
def test_u_monotone_concave_on_grid(gamma):
    u = exponential_utility(gamma)
    x = np.linspace(-5, 5, 201)
    v = u.u(x)
    assert np.all(np.diff(v) >= 0)
    assert np.all(np.diff(v, 2) <= 1e-12)


@pytest.mark.parametrize("gamma", GAMMAS)
def test_phi_superlinear(gamma):
    u = exponential_utility(gamma)
    y = np.geomspace(10.0, 1e8, 30)
    ratio = u.phi(y) / y
    assert np.all(np.diff(ratio) > 0)


@given(
    gamma=st.sampled_from(GAMMAS),
    x=st.floats(-10, 10),
    y=st.floats(1e-6, 50),
)
def test_fenchel_inequality(gamma, x, y):
    u = exponential_utility(gamma)
    assert u.phi(y) >= float(u.u(x)) - x * y - 1e-12 * (1 + abs(x * y))


@given(gamma=st.sampled_from(GAMMAS), y=st.floats(1e-3, 50))
def test_fenchel_young_equality(gamma, y):
    u = exponential_utility(gamma)
    x = -u.phi_prime(y)
    assert float(u.u(x)) - x * y == pytest.approx(u.phi(y), abs=1e-9 * max(1.0, abs(u.phi(y))))


@pytest.mark.parametrize("y", [0.3, 1.0, 2.5])
def test_fenchel_young_equality_custom(y):
    u = neg_exp()
    x = -u.phi_prime(y)
    assert float(u.u(x)) - x * y == pytest.approx(u.phi(y), abs=1e-9)


# ---------------------------------------------------------------- Young pair


@pytest.mark.parametrize("gamma", GAMMAS)
def test_young_pair_shape(gamma):
    yp = young_pair(exponential_utility(gamma))
    x = np.linspace(0, 4, 81)
    assert yp.u_hat(0.0) == 0.0
    np.testing.assert_array_equal(yp.u_hat(x), yp.u_hat(-x))
    v = yp.u_hat(x)
    assert np.all(np.diff(v) >= 0) and np.all(np.diff(v, 2) >= -1e-12)


@pytest.mark.parametrize("gamma", GAMMAS)
def test_phi_hat_vanishes_on_beta_interval(gamma):
    u = exponential_utility(gamma)
    b = u.beta
    ys = np.linspace(-b, b, 101)
    assert np.all(u.phi_hat(ys) == 0.0)
    assert u.phi_hat(b * (1 - 1e-6)) == 0.0
    assert u.phi_hat(b * (1 + 1e-6)) > 0.0
    y = 3.0 * b
    assert u.phi_hat(-y) == pytest.approx(u.phi(y) - u.phi(b), rel=1e-14)


@given(gamma=st.sampled_from(GAMMAS), x=st.floats(-5, 5), y=st.floats(-50, 50))
def test_young_inequality(gamma, x, y):
    u = exponential_utility(gamma)
    assert abs(x * y) <= u.u_hat(x) + u.phi_hat(y) + 1e-9 * (1 + abs(x * y))


# ---------------------------------------------------------------- norms


def test_norm_of_zero():
    f = DiscreteDistribution(np.zeros(3), np.full(3, 1 / 3))
    u = exponential_utility(1.0)
    assert luxemburg_norm(f, u) == 0.0
    assert orlicz_dual_norm(f, u) == 0.0


@pytest.mark.parametrize("gamma", GAMMAS)
@pytest.mark.parametrize("c", [0.1, 1.0, -2.5, 7.0])
def test_luxemburg_constant(gamma, c):
    f = DiscreteDistribution(np.full(4, c), np.full(4, 0.25))
    target = gamma * abs(c) / math.log(2.0)
    assert luxemburg_norm(f, exponential_utility(gamma)) == pytest.approx(target, rel=1e-10)


probs_values = st.integers(2, 6).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n),
        st.lists(st.floats(-3, 3), min_size=n, max_size=n),
        st.lists(st.floats(-3, 3), min_size=n, max_size=n),
    )
)


def _dist(w, v):
    p = np.asarray(w) / np.sum(w)
    p[-1] = 1.0 - p[:-1].sum()
    return DiscreteDistribution(np.asarray(v), p)


@given(data=probs_values, gamma=st.sampled_from(GAMMAS), t=st.floats(0.1, 10))
def test_norm_axioms(data, gamma, t):
    w, a, b = data
    u = exponential_utility(gamma)
    fa, fb = _dist(w, a), _dist(w, b)
    fab = DiscreteDistribution(fa.values + fb.values, fa.probs)
    na, nb = luxemburg_norm(fa, u), luxemburg_norm(fb, u)
    assert luxemburg_norm(fab, u) <= na + nb + 1e-9
    assert luxemburg_norm(fa.scaled(t), u) == pytest.approx(t * na, rel=1e-9, abs=1e-12)
    assert luxemburg_norm(fa.scaled(-t), u) == pytest.approx(t * na, rel=1e-9, abs=1e-12)


@given(data=probs_values, gamma=st.sampled_from(GAMMAS))
def test_holder_bound(data, gamma):
    w, a, b = data
    u = exponential_utility(gamma)
    f, g = _dist(w, a), _dist(w, b)
    lhs = float(f.probs @ np.abs(f.values * g.values))
    assert lhs <= 2 * luxemburg_norm(f, u) * orlicz_dual_norm(g, u) + 1e-9


def test_dual_norm_two_point_grid():
    u = exponential_utility(1.0)
    g = DiscreteDistribution([1.0, 1.0], [0.5, 0.5])
    # sup E|f| subject to E[exp|f| - 1] <= 1 on a grid over (f1, f2) >= 0
    f1 = np.linspace(0, math.log(3.0), 20001)
    # for each f1 take the largest feasible f2
    f2 = np.log(np.maximum(4.0 - np.exp(f1), 1.0))
    brute = float(np.max(0.5 * f1 + 0.5 * f2))
    assert orlicz_dual_norm(g, u) == pytest.approx(brute, abs=1e-6)


# ---------------------------------------------------------------- admissibility


def test_finite_claims_always_admissible():
    rep = claim_admissible(np.array([1.0, -2.0, 3.0]), exponential_utility(1.0))
    assert rep.gains and rep.positive_bound and rep.eps_condition and rep.admissible
    assert math.isinf(rep.L) and math.isinf(rep.l)


@pytest.mark.parametrize("delta", [0.1, 0.3, 0.9])
def test_delta_y_claim(delta):
    rep = claim_admissible(ExpTailVariable(0.0, delta, 1.0), exponential_utility(1.0))
    assert rep.eps_condition is True
    assert rep.L == pytest.approx(1 / delta, rel=1e-10)
    assert math.isinf(rep.l)


def test_y_claim_fails_eps_condition():
    rep = claim_admissible(ExpTailVariable(0.0, 1.0, 1.0), exponential_utility(1.0))
    assert rep.eps_condition is False
    assert not rep.admissible


def test_custom_utility_moment_test_inconclusive():
    rep = claim_admissible(ExpTailVariable(0.0, 0.5, 1.0), neg_exp())
    assert rep.eps_condition is None
    assert any("divergent" in n for n in rep.notes)


@pytest.mark.parametrize("power,finite", [(0.5, True), (1.0, False), (2.0, False)])
def test_moment_classification_consistent(power, finite):
    # E[u_hat(a X)] < inf must agree with E[u(-a X)] > -inf for the exponential utility
    u = exponential_utility(1.0)
    var = ExpTailVariable(0.0, 1.0, power)
    a = exp_moment_abscissa(var, u)
    assert math.isinf(a) == finite
    if power == 1.0:
        assert a == pytest.approx(1.0, rel=1e-10)
