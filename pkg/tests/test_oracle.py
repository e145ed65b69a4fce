import math

import numpy as np
import pytest

from orlicz_indiff import FiniteMarket, exponential_utility, maximize, minimize_dual, random_market
from orlicz_indiff.dual import lambda_foc
from orlicz_indiff.oracle import GridSpec, enumerate_vertices, grid_dual, grid_primal, vertex_sup

U1 = exponential_utility(1.0)


def test_grid_primal_symmetric(two_state):
    res = grid_primal(two_state, U1, 0.0, 0.0, target_step=1e-3)
    assert res.value == pytest.approx(maximize(two_state, U1, 0.0, 0.0).value, abs=1e-4)


def test_grid_primal_replicable(three_state):
    B = three_state.delta_s[:, 0] * 0.8
    res = grid_primal(three_state, U1, B, 0.0)
    assert res.argbest == pytest.approx([0.8], abs=1e-5)


def test_grid_primal_refinement_converges():
    m = FiniteMarket([0.7, 0.3], [[1.0], [-1.0]])
    exact = maximize(m, U1, 0.0, 0.0).value
    coarse = abs(grid_primal(m, U1, 0.0, 0.0, GridSpec(points=11, zoom=2.0), target_step=1e-1).value - exact)
    fine = abs(grid_primal(m, U1, 0.0, 0.0, GridSpec(points=11, zoom=2.0), target_step=1e-3).value - exact)
    assert fine <= 0.5 * coarse


def test_grid_spec_must_refine():
    with pytest.raises(ValueError):
        GridSpec(points=5, zoom=4.0)


def test_grid_dual_two_state_is_lambda_search():
    m = FiniteMarket([0.7, 0.3], [[1.0], [-1.0]])
    res = grid_dual(m, U1, 0.0, 0.0)
    lam = lambda_foc(U1, np.array([0.5, 0.5]) / m.probs, m.probs, 0.0)
    assert res.argbest[0] == pytest.approx(lam, rel=1e-4)
    np.testing.assert_allclose(res.argbest[1:], [0.5, 0.5], atol=1e-12)


def test_grid_dual_three_state(skewed_three_state):
    primal = maximize(skewed_three_state, U1, 0.0, 0.0).value
    res = grid_dual(skewed_three_state, U1, 0.0, 0.0, primal_value=primal)
    assert res.value == pytest.approx(minimize_dual(skewed_three_state, U1, 0.0, 0.0).value, abs=1e-3)
    assert res.weak_duality_violation <= 1e-9


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_market_oracles(seed):
    rng = np.random.default_rng(seed)
    m = random_market(rng, 3, 1)
    B = rng.uniform(-1, 1, 3)
    primal = maximize(m, U1, B, 0.0).value
    assert grid_primal(m, U1, B, 0.0).value == pytest.approx(primal, abs=1e-4)
    gd = grid_dual(m, U1, B, 0.0, primal_value=primal)
    assert gd.value == pytest.approx(minimize_dual(m, U1, B, 0.0).value, abs=1e-3)
    assert gd.weak_duality_violation <= 1e-9


def test_grid_limits():
    m = random_market(np.random.default_rng(0), 6, 3)
    with pytest.raises(ValueError):
        grid_primal(m, U1)
    m = random_market(np.random.default_rng(0), 6, 1)
    with pytest.raises(ValueError):
        grid_dual(m, U1)


def test_vertices(three_state):
    verts = enumerate_vertices(three_state)
    assert len(verts) == 2
    assert vertex_sup(three_state, [1.0, 0.0, 0.0]) == pytest.approx(0.5)
    assert vertex_sup(three_state, [0.0, 1.0, 0.0]) == pytest.approx(1.0)
    assert not math.isnan(vertex_sup(three_state, 0.0))
