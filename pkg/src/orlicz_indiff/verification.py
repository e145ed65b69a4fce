"""Seeded verification suites shared by ``orlicz-indiff verify`` and the test-suite.

Each suite returns a :class:`SuiteResult` holding the worst residual seen and
the tolerance it is judged against.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import exp_mixture as em
from .dual import minimize_dual
from .indifference import (
    Penalty,
    dual_price_representation,
    price,
    price_bounds,
    price_exponential,
    risk_measure_axioms,
    subdifferential_residual,
    volume_asymptotics,
)
from .market import FiniteMarket, random_market
from .oracle import grid_dual, grid_primal
from .primal import maximize
from .utility import DiscreteDistribution, exponential_utility, luxemburg_norm

__all__ = [
    "SuiteResult",
    "fuzz_markets",
    "suite_duality",
    "suite_oracle",
    "suite_routes",
    "suite_axioms",
    "suite_fatou",
    "suite_volume",
    "suite_examples",
    "suite_norms",
    "SUITES",
    "DEFAULT_SEED",
]

DEFAULT_SEED = 42
GAMMAS = (0.5, 1.0, 2.0)


@dataclass
class SuiteResult:
    """Named checks, each a ``(worst value, tolerance)`` pair, plus run facts."""

    name: str
    checks: dict
    seconds: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v <= t for v, t in self.checks.values())

    def failures(self) -> list:
        return [k for k, (v, t) in self.checks.items() if not v <= t]


def fuzz_markets(seed: int, count: int, max_states: int = 6, max_assets: int = 2):
    """``(market, gamma, claim)`` triples: random no-arbitrage markets and bounded claims."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = int(rng.integers(2, max_states + 1))
        d = int(rng.integers(1, min(max_assets, n - 1) + 1))
        m = random_market(rng, n, d)
        claim = rng.uniform(-1.0, 1.0, n) * float(rng.choice([0.5, 1.0, 3.0]))
        out.append((m, GAMMAS[k % len(GAMMAS)], claim))
    return out


def _timed(fn: Callable[[], SuiteResult]) -> SuiteResult:
    t0 = time.perf_counter()
    res = fn()
    res.seconds = time.perf_counter() - t0
    return res


def suite_duality(seed: int = DEFAULT_SEED, count: int = 100, tol: float = 1e-7) -> SuiteResult:
    def run():
        gap = lam_res = q_res = 0.0
        for m, gamma, B in fuzz_markets(seed, count):
            u = exponential_utility(gamma)
            sol = minimize_dual(m, u, B, 0.0)
            gap = max(gap, sol.duality_gap)
            lam_res = max(lam_res, sol.foc_lambda_residual)
            q_res = max(q_res, sol.foc_q_residual)
        return SuiteResult("duality", {
            "duality_gap": (gap, tol),
            "lambda_foc": (lam_res, 1e-9),
            "q_variational": (q_res, 1e-8),
        }, info={"markets": count})

    return _timed(run)


def oracle_markets(seed: int, count: int):
    """Fuzz markets whose martingale polytope has dimension at most two."""
    picked = []
    k = 0
    while len(picked) < count:
        batch = fuzz_markets(seed + k, 100)
        picked += [t for t in batch if t[0].n_states - 1 - t[0].n_assets <= 2]
        k += 1
    return picked[:count]


def suite_oracle(seed: int = DEFAULT_SEED, count: int = 10) -> SuiteResult:
    def run():
        worst_p = worst_d = worst_weak = lam_res = q_res = 0.0
        for m, gamma, B in oracle_markets(seed, count):
            u = exponential_utility(gamma)
            primal = maximize(m, u, B, 0.0).value
            sol = minimize_dual(m, u, B, 0.0, compute_gap=False)
            dual = sol.value
            lam_res = max(lam_res, sol.foc_lambda_residual)
            q_res = max(q_res, sol.foc_q_residual)
            gp = grid_primal(m, u, B, 0.0)
            gd = grid_dual(m, u, B, 0.0, primal_value=primal)
            worst_p = max(worst_p, abs(primal - gp.value))
            worst_d = max(worst_d, abs(dual - gd.value))
            worst_weak = max(worst_weak, gd.weak_duality_violation)
        return SuiteResult("oracle", {
            "primal_vs_grid": (worst_p, 1e-4),
            "dual_vs_grid": (worst_d, 1e-3),
            "weak_duality_violation": (worst_weak, 1e-9),
            "lambda_foc": (lam_res, 1e-9),
            "q_variational": (q_res, 1e-8),
        }, info={"markets": count})

    return _timed(run)


def suite_routes(seed: int = DEFAULT_SEED, count: int = 50, tol: float = 1e-7) -> SuiteResult:
    def run():
        rng = np.random.default_rng(seed + 1)
        worst = worst_repl = worst_sub = 0.0
        for m, gamma, B in fuzz_markets(seed, count):
            u = exponential_utility(gamma)
            root = price(m, u, B, 0.0)
            closed = price_exponential(m, gamma, B, 0.0)
            rep = dual_price_representation(m, u, B, 0.0, rng=rng, check=False)
            worst = max(worst, abs(root - closed), abs(root - rep.price), abs(closed - rep.price))
            for Q in rep.maximizers:
                worst_sub = max(worst_sub, subdifferential_residual(m, u, B, 0.0, root, Q))
            c = float(rng.normal())
            h = rng.normal(size=m.n_assets)
            worst_repl = max(worst_repl, abs(price(m, u, c + m.delta_s @ h, 0.0) - c))
        return SuiteResult("routes", {
            "route_agreement": (worst, tol),
            "replicable_price": (worst_repl, 1e-9),
            "q_variational": (worst_sub, 1e-8),
        }, info={"instances": count})

    return _timed(run)


def _axiom_market(seed: int) -> FiniteMarket:
    return random_market(np.random.default_rng(seed), 4, 1)


def suite_axioms(seed: int = DEFAULT_SEED, pairs: int = 100, tol: float = 1e-8) -> SuiteResult:
    def run():
        m = _axiom_market(seed)
        rep = risk_measure_axioms(m, exponential_utility(1.0), 0.0,
                                  rng=np.random.default_rng(seed), n_pairs=pairs)
        return SuiteResult("axioms", {
            "convexity": (rep.convexity, tol),
            "rho_convexity": (rep.rho_convexity, tol),
            "monotonicity": (rep.monotonicity, tol),
            "translation": (rep.translation, tol),
            "fatou": (rep.fatou, 1e-7),
        }, info={"pairs": pairs})

    return _timed(run)


def suite_fatou(seed: int = DEFAULT_SEED, claims: int = 100, tol: float = 1e-7) -> SuiteResult:
    from .indifference import _fatou_residual

    def run():
        m = _axiom_market(seed)
        u = exponential_utility(1.0)
        u0 = maximize(m, u, 0.0, 0.0).value
        rng = np.random.default_rng(seed + 7)
        worst = 0.0
        for _ in range(claims):
            B = rng.uniform(-1, 1, m.n_states)
            worst = max(worst, _fatou_residual(lambda b: price(m, u, b, 0.0, u0=u0), B))
        return SuiteResult("fatou", {"continuity_from_below": (worst, tol)}, info={"claims": claims})

    return _timed(run)


def suite_volume(seed: int = DEFAULT_SEED, count: int = 10) -> SuiteResult:
    def run():
        worst0 = worst_inf = lam_res = q_res = 0.0
        for m, gamma, B in fuzz_markets(seed + 3, count):
            u = exponential_utility(gamma)
            # the zero-penalty measure behind the lower bound is the B = 0 dual minimiser
            sol = minimize_dual(m, u, 0.0, 0.0, compute_gap=False)
            lam_res = max(lam_res, sol.foc_lambda_residual)
            q_res = max(q_res, sol.foc_q_residual)
            va = volume_asymptotics(m, u, B, 0.0)
            worst0 = max(worst0, va.slope0_error)
            worst_inf = max(worst_inf, va.slope_inf_error)
        return SuiteResult("volume", {
            "slope_at_zero": (worst0, 1e-4),
            "slope_at_infinity": (worst_inf, 1e-3),
            "lambda_foc": (lam_res, 1e-9),
            "q_variational": (q_res, 1e-8),
        }, info={"instances": count})

    return _timed(run)


def example_alpha(scale: float = 0.2):
    """A bounded claim correlated with the stock: ``scale * tanh(Y Z)``."""
    return em.BoundedAlphaClaim(lambda y, z: scale * np.tanh(np.asarray(y, dtype=float) * z), abs(scale))


def suite_examples(seed: int = DEFAULT_SEED) -> SuiteResult:
    def run():
        base = em.ExpMixtureMarket.default()
        m2 = base.with_claim(em.DeltaYClaim(0.3))
        h2 = em.optimal_h(m2)
        s_formula = em.singular_mass(m2, "formula")
        s_quad = em.singular_mass(m2, "quadrature")
        m1 = base.with_claim(example_alpha())
        h1 = em.optimal_h(m1)
        flag = lambda ok: (0.0 if ok else 1.0, 0.0)  # noqa: E731
        checks = {
            "ex2_h_star": (abs(h2.h_star - 0.7), 0.0),
            "ex2_boundary": flag(h2.attained_at_boundary and em.g_prime(m2, 0.7) > 0),
            "ex2_mass_positive": flag(s_formula > 0),
            "ex2_mass_routes": (abs(s_formula - s_quad) / abs(s_formula), 1e-8),
            "ex2_hedge": (abs(em.hedging_delta(m2, base) + 0.3), 1e-12),
            "ex1_h_star": (abs(h1.h_star - 1.0), 0.0),
            "ex1_hedge": (abs(em.hedging_delta(m1, base)), 1e-10),
            "ex1_mass_positive": flag(em.singular_mass(m1) > 0),
            "ex1_bound_zero": flag(em.singular_bounds(m1).claim_action_zero),
        }
        return SuiteResult("examples", checks)

    return _timed(run)


def suite_norms(seed: int = DEFAULT_SEED, triples: int = 50, tol: float = 1e-9) -> SuiteResult:
    def run():
        rng = np.random.default_rng(seed + 11)
        worst_const = worst_tri = worst_hom = worst_hat = 0.0
        for gamma in GAMMAS:
            u = exponential_utility(gamma)
            for c in (0.1, 1.0, -2.5, 7.0):
                f = DiscreteDistribution(np.full(3, c), np.full(3, 1 / 3))
                target = gamma * abs(c) / math.log(2.0)
                worst_const = max(worst_const, abs(luxemburg_norm(f, u) - target) / max(1.0, target))
            ys = np.linspace(-u.beta, u.beta, 101)
            worst_hat = max(worst_hat, float(np.abs(u.phi_hat(ys)).max()))
        for _ in range(triples):
            u = exponential_utility(float(rng.choice(GAMMAS)))
            n = int(rng.integers(2, 7))
            p = rng.dirichlet(np.ones(n))
            a, b = rng.normal(size=n), rng.normal(size=n)
            na = luxemburg_norm(DiscreteDistribution(a, p), u)
            nb = luxemburg_norm(DiscreteDistribution(b, p), u)
            nab = luxemburg_norm(DiscreteDistribution(a + b, p), u)
            worst_tri = max(worst_tri, nab - na - nb)
            t = float(rng.uniform(0.1, 10.0))
            worst_hom = max(worst_hom, abs(luxemburg_norm(DiscreteDistribution(t * a, p), u) - t * na) / max(1.0, t * na))
        return SuiteResult("norms", {
            "constant_claims": (worst_const, 1e-10),
            "triangle": (worst_tri, tol),
            "homogeneity": (worst_hom, tol),
            "phi_hat_on_beta_interval": (worst_hat, 0.0),
        })

    return _timed(run)


SUITES = {
    "duality": suite_duality,
    "oracle": suite_oracle,
    "routes": suite_routes,
    "axioms": suite_axioms,
    "fatou": suite_fatou,
    "volume": suite_volume,
    "examples": suite_examples,
    "norms": suite_norms,
}


def run_suites(names, seed: int = DEFAULT_SEED, seeds: Optional[int] = None) -> list:
    out = []
    for name in names:
        fn = SUITES[name]
        if name == "duality" and seeds is not None:
            out.append(fn(seed, count=seeds))
        else:
            out.append(fn(seed))
    return out
