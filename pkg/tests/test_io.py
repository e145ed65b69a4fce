import json
import math

import numpy as np
import pytest

from orlicz_indiff import DeltaYClaim, MarketValidationError, ProbabilityNormalizationError
from orlicz_indiff.io import (
    exp_mixture_from_dict,
    load_market,
    market_from_dict,
    market_to_dict,
    utility_from_dict,
)


def test_market_roundtrip(tmp_path):
    d = {"probs": [0.5, 0.2, 0.3], "delta_s": [[1.0], [0.0], [-1.0]], "x0": 0.5, "claim": [1, 0, 0]}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(d))
    m = load_market(path)
    assert m.x0 == 0.5 and m.claim.tolist() == [1.0, 0.0, 0.0]
    again = market_from_dict(market_to_dict(m))
    np.testing.assert_array_equal(again.delta_s, m.delta_s)
    np.testing.assert_array_equal(again.loss_variable, m.loss_variable)


def test_market_errors(tmp_path):
    with pytest.raises(ProbabilityNormalizationError, match="probabilities must sum to 1"):
        market_from_dict({"probs": [0.5, 0.4], "delta_s": [[1], [-1]]})
    with pytest.raises(MarketValidationError, match="delta_s"):
        market_from_dict({"probs": [0.5, 0.5]})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(MarketValidationError, match="not valid JSON"):
        load_market(bad)


def test_exp_mixture_spec():
    m = exp_mixture_from_dict({"z_atoms": "default 20", "claim": {"type": "delta_y", "delta": 0.3}})
    assert m.z.size == 20 and m.claim == DeltaYClaim(0.3)
    m = exp_mixture_from_dict({"z_atoms": [[1.0, 1.0]], "gamma": 2.0})
    assert m.gamma == 2.0
    with pytest.raises(MarketValidationError):
        exp_mixture_from_dict({"z_atoms": "default"})
    with pytest.raises(MarketValidationError):
        exp_mixture_from_dict({"z_atoms": "default 5", "claim": {"type": "nope"}})


def test_utility_formula():
    u = utility_from_dict({"u": "-exp(-2*x)"})
    assert u.u_infinity == 0.0
    assert u.u_prime(0.0) == pytest.approx(2.0)
    assert u.u_second(np.zeros(3)).shape == (3,)
    assert u.phi(2.0) == pytest.approx(-1.0, abs=1e-8)
    lin = utility_from_dict({"u": "x - exp(-x)"})
    assert math.isinf(lin.u_infinity)
    with pytest.raises(MarketValidationError):
        utility_from_dict({"u": "x + y"})
    with pytest.raises(MarketValidationError):
        utility_from_dict({"u": "exp("})


def test_exp_mixture_legacy_atoms_keyword():
    a = exp_mixture_from_dict({"z_atoms": "paper-default 10"})
    b = exp_mixture_from_dict({"z_atoms": "default 10"})
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.p, b.p)
