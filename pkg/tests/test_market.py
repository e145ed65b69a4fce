import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orlicz_indiff import (
    ArbitrageError,
    ExpMixtureMarket,
    ExpTailVariable,
    FiniteMarket,
    MarketValidationError,
    ProbabilityNormalizationError,
    check_compatible,
    check_suitable,
    exponential_utility,
    martingale_polytope,
    random_market,
    replicable,
)


def test_validation_errors():
    with pytest.raises(ProbabilityNormalizationError, match="probabilities must sum to 1"):
        FiniteMarket([0.5, 0.4], [[1.0], [-1.0]])
    with pytest.raises(MarketValidationError):
        FiniteMarket([1.2, -0.2], [[1.0], [-1.0]])
    with pytest.raises(MarketValidationError):
        FiniteMarket([0.5, 0.5], [[1.0], [-1.0]], loss_variable=[0.5, 2.0])
    with pytest.raises(MarketValidationError):
        FiniteMarket([0.5, 0.5], [[1.0], [-1.0]], claim=[1.0, 2.0, 3.0])


def test_arbitrage_rejected():
    with pytest.raises(ArbitrageError):
        FiniteMarket([0.5, 0.5], [[1.0], [0.0]])


def test_default_loss_variable():
    m = FiniteMarket([0.5, 0.5], [[2.0], [-3.0]])
    np.testing.assert_array_equal(m.loss_variable, [3.0, 4.0])
    assert check_suitable(m).suitable


def test_suitability_examples():
    assert check_suitable(FiniteMarket([0.5, 0.5], [[1.0], [-1.0]], loss_variable=[1.0, 1.0])).suitable
    rep = check_suitable(FiniteMarket([0.5, 0.5], [[5.0], [-1.0]], loss_variable=[1.0, 1.0]))
    assert not rep.suitable
    assert rep.scale == pytest.approx(5.0)


def test_compatibility():
    u = exponential_utility(1.0)
    rep = check_compatible(FiniteMarket([0.5, 0.5], [[1.0], [-1.0]]), u)
    assert (rep.strong, rep.weak) == (True, True)
    rep = check_compatible(ExpMixtureMarket.default(), u)
    assert (rep.strong, rep.weak) == (False, True)
    rep = check_compatible(ExpTailVariable(1.0, 1.0, 0.5), u)
    assert (rep.strong, rep.weak) == (True, True)


def test_polytope_two_state(two_state):
    poly = martingale_polytope(two_state)
    assert poly.dim == 0
    np.testing.assert_allclose(poly.vertices(), [[0.5, 0.5]], atol=1e-15)


def test_polytope_three_state(three_state):
    poly = martingale_polytope(three_state)
    assert poly.dim == 1
    verts = sorted(map(tuple, poly.vertices()))
    np.testing.assert_allclose(verts, [(0.0, 1.0, 0.0), (0.5, 0.0, 0.5)], atol=1e-12)
    for t in (0.01, 0.2, 0.49):
        assert poly.contains([t, 1 - 2 * t, t])
    assert not poly.contains([0.2, 0.5, 0.3])


def test_polytope_without_assets():
    m = FiniteMarket([0.2, 0.3, 0.5], np.zeros((3, 0)))
    poly = martingale_polytope(m)
    assert poly.dim == 2
    np.testing.assert_allclose(sorted(map(tuple, poly.vertices())), sorted(map(tuple, np.eye(3))))


def test_replicable_examples(two_state, three_state):
    c, h = replicable(three_state, three_state.delta_s[:, 0])
    assert c == pytest.approx(0.0, abs=1e-14) and h == pytest.approx([1.0])
    c, h = replicable(three_state, np.full(3, 5.0))
    assert c == pytest.approx(5.0) and h == pytest.approx([0.0], abs=1e-14)
    assert replicable(three_state, [1.0, 0.0, 0.0]) is None
    assert replicable(two_state, [1.0, 0.0]) is not None


@given(seed=st.integers(0, 10_000), n=st.integers(2, 6), d=st.integers(1, 3))
def test_random_market_interior_is_martingale(seed, n, d):
    d = min(d, n - 1)
    m = random_market(np.random.default_rng(seed), n, d)
    q = m.interior_point
    assert np.all(q > 0)
    assert martingale_polytope(m).contains(q, tol=1e-10)


@given(seed=st.integers(0, 10_000))
def test_replicable_claims_have_one_price(seed):
    rng = np.random.default_rng(seed)
    m = random_market(rng, 5, 2)
    c = float(rng.normal())
    B = c + m.delta_s @ rng.normal(size=2)
    poly = martingale_polytope(m)
    qs = np.vstack([poly.vertices(), poly.sample(rng, 10)])
    np.testing.assert_allclose(qs @ B, c, atol=1e-9)
    for q in qs:
        assert poly.contains(q)
