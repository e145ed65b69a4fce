"""JSON readers for market files, exponential-mixture specs and custom utilities.

Finite market file::

    {"probs": [..], "delta_s": [[..], ..], "W": [..], "x0": 0.0, "claim": [..]}

``W`` and ``claim`` are optional; ``delta_s`` has one row per state.

Exponential-mixture spec::

    {"gamma": 1.0,
     "z_atoms": [[z, p], ..]  or  "default 50",
     "p1": 0.99, "r": 0.1,
     "claim": {"type": "delta_y", "delta": 0.3}
            | {"type": "zero"}
            | {"type": "bounded_alpha", "grid": [[y, z, value], ..]}}

Custom utility spec::

    {"u": "-exp(-x) + x/(1 + x**2)", "strictly_concave": true, "u_infinity": 0.0}

``u`` is a formula in ``x``; its derivatives are taken symbolically.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Union

import numpy as np

from .exp_mixture import BoundedAlphaClaim, DeltaYClaim, ExpMixtureMarket, ZeroClaim, default_atoms
from .market import FiniteMarket, MarketValidationError, ProbabilityNormalizationError
from .utility import UtilityFunction, custom_utility

__all__ = [
    "load_json",
    "market_from_dict",
    "load_market",
    "market_to_dict",
    "exp_mixture_from_dict",
    "load_exp_mixture",
    "utility_from_dict",
    "load_utility",
]

PathLike = Union[str, Path]


def load_json(path: PathLike) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MarketValidationError(f"{path}: not valid JSON ({exc})") from exc


def _require(d: dict, key: str):
    if key not in d:
        raise MarketValidationError(f"missing field {key!r}")
    return d[key]


def market_from_dict(d: dict) -> FiniteMarket:
    probs = np.asarray(_require(d, "probs"), dtype=float)
    if probs.ndim == 1 and probs.size and abs(probs.sum() - 1.0) > 1e-12:
        raise ProbabilityNormalizationError("probabilities must sum to 1")
    return FiniteMarket(
        probs=probs,
        delta_s=np.asarray(_require(d, "delta_s"), dtype=float),
        loss_variable=None if d.get("W") is None else np.asarray(d["W"], dtype=float),
        x0=float(d.get("x0", 0.0)),
        claim=None if d.get("claim") is None else np.asarray(d["claim"], dtype=float),
    )


def load_market(path: PathLike) -> FiniteMarket:
    return market_from_dict(load_json(path))


def market_to_dict(m: FiniteMarket) -> dict:
    out = {
        "probs": m.probs.tolist(),
        "delta_s": m.delta_s.tolist(),
        "W": m.loss_variable.tolist(),
        "x0": m.x0,
    }
    if m.claim is not None:
        out["claim"] = m.claim.tolist()
    return out


def _claim_from_dict(c: dict):
    kind = c.get("type", "zero")
    if kind == "zero":
        return ZeroClaim()
    if kind == "delta_y":
        return DeltaYClaim(float(_require(c, "delta")))
    if kind == "bounded_alpha":
        return BoundedAlphaClaim.from_grid(_require(c, "grid"))
    raise MarketValidationError(f"unknown claim type {kind!r}")


def exp_mixture_from_dict(d: dict, check_monotone: bool = True) -> ExpMixtureMarket:
    atoms = _require(d, "z_atoms")
    if isinstance(atoms, str):
        parts = atoms.split()
        # "paper-default N" is the keyword used by existing spec files
        if len(parts) != 2 or parts[0] not in ("default", "paper-default"):
            raise MarketValidationError("z_atoms must be a list of [z, p] or 'default N'")
        z, p = default_atoms(int(parts[1]), float(d.get("p1", 0.99)), float(d.get("r", 0.1)))
    else:
        arr = np.asarray(atoms, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise MarketValidationError("z_atoms rows must be [z, p]")
        z, p = arr[:, 0], arr[:, 1]
    claim = _claim_from_dict(d.get("claim", {"type": "zero"}))
    return ExpMixtureMarket(z, p, float(d.get("gamma", 1.0)), claim, check_monotone)


def load_exp_mixture(path: PathLike, check_monotone: bool = True) -> ExpMixtureMarket:
    return exp_mixture_from_dict(load_json(path), check_monotone)


def utility_from_dict(d: dict) -> UtilityFunction:
    """Build a custom utility from a formula in x (parsed with sympy)."""
    import sympy

    x = sympy.Symbol("x", real=True)
    try:
        expr = sympy.sympify(_require(d, "u"), locals={"x": x})
    except (sympy.SympifyError, TypeError) as exc:
        raise MarketValidationError(f"cannot parse utility formula: {exc}") from exc
    if expr.free_symbols - {x}:
        raise MarketValidationError("utility formula may only depend on x")
    d1 = sympy.diff(expr, x)
    d2 = sympy.diff(d1, x)
    u, up, upp = (sympy.lambdify(x, e, "numpy") for e in (expr, d1, d2))

    def vec(fn):
        # lambdify returns a bare scalar for constant derivatives; broadcast it
        def wrapped(t):
            t = np.asarray(t, dtype=float)
            out = np.broadcast_to(np.asarray(fn(t), dtype=float), t.shape).copy()
            return out if out.ndim else float(out)

        return wrapped

    u_inf = d.get("u_infinity")
    if u_inf is None:
        lim = sympy.limit(expr, x, sympy.oo)
        u_inf = math.inf if lim in (sympy.oo,) or not lim.is_finite else float(lim)
    return custom_utility(vec(u), vec(up), vec(upp), u_infinity=float(u_inf),
                          strictly_concave=bool(d.get("strictly_concave", True)))


def load_utility(path: PathLike) -> UtilityFunction:
    return utility_from_dict(load_json(path))
