"""Seller's indifference price on finite markets and its dual description.

``price`` solves ``U_B(x + p) = U_0(x)`` for p.  The price also equals
``max_Q {E_Q[B] - alpha(Q)}`` over martingale measures, where the minimal
penalty is ``alpha(Q) = x + inf_lambda (E[Phi(lambda dQ/dP)] - U_0(x)) / lambda``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dual import (
    PolytopeFace,
    minimize_dual,
    projected_newton,
    q_variational_residual,
    relative_entropy,
)
from .market import FiniteMarket, MartingaleMeasure, martingale_polytope
from .primal import ConvergenceError, _claim_vector, exponential_log_value, maximize
from .utility import UtilityFunction

__all__ = [
    "PriceReport",
    "UtilitySaturationError",
    "price",
    "price_exponential",
    "penalty",
    "Penalty",
    "DualPrice",
    "dual_price_representation",
    "PriceBounds",
    "price_bounds",
    "VolumeAsymptotics",
    "volume_asymptotics",
    "AxiomReport",
    "risk_measure_axioms",
    "price_report",
    "subdifferential_residual",
]

PRICE_TOL = 1e-12
ROUTE_TOL = 1e-8
ARGMAX_TOL = 1e-7
RESTARTS = 20
VI_TOL = 1e-11
SMALL_VOLUMES = (1e-2, 1e-3, 1e-4)
LARGE_VOLUMES = (1e2, 1e3, 1e4)


class UtilitySaturationError(ConvergenceError):
    code = "utility-saturation"


# --------------------------------------------------------------------------
# root-finding price


def _value_and_slope(m, u, B, x):
    """Optimal utility at wealth x and its derivative in x (envelope theorem)."""
    sol = maximize(m, u, B, x)
    w = sol.f_B - B
    slope = float(m.probs @ u.u_prime(w))
    return sol.value, slope


def price(m: FiniteMarket, u: UtilityFunction, B=None, x: Optional[float] = None,
          tol: float = PRICE_TOL, u0: Optional[float] = None) -> float:
    """Indifference price by safeguarded Newton on ``p -> U_B(x + p) - U_0(x)``.

    The slope ``dU_B/dp`` is the expected marginal utility at the optimum, so
    the utility residual divided by it is a residual in price units; the
    iteration stops once that is below ``tol`` (relative to ``max(1, |p|)``).
    Bisection keeps the iterate inside ``[min B, max B]``, which contains
    the price because every martingale measure averages B.  ``u0`` may be
    passed to reuse ``U_0(x)`` across claims.
    """
    B = _claim_vector(m, B)
    x = m.x0 if x is None else float(x)
    if u0 is None:
        u0 = maximize(m, u, 0.0, x).value
    if not u0 < u.u_infinity:
        raise UtilitySaturationError("utility-saturation: U_0(x) already equals u(+inf)")

    lo, hi = float(B.min()), float(B.max())
    if hi - lo <= tol * max(1.0, abs(lo)):
        return lo
    p = min(max(float(m.probs @ B), lo), hi)
    for _ in range(200):
        val, slope = _value_and_slope(m, u, B, x + p)
        r = val - u0
        if not math.isfinite(val) or val >= u.u_infinity:
            raise UtilitySaturationError("utility-saturation: U_B reached u(+inf) before matching U_0")
        if r == 0:
            return p
        if r < 0:
            lo = p
        else:
            hi = p
        step = r / slope if slope > 0 and math.isfinite(slope) else math.inf
        if abs(step) <= tol * max(1.0, abs(p)):
            return p - step if lo <= p - step <= hi else p
        p_new = p - step
        if not (lo < p_new < hi):
            p_new = 0.5 * (lo + hi)
        if hi - lo <= tol * max(1.0, abs(p)):
            return 0.5 * (lo + hi)
        p = p_new
    raise ConvergenceError("indifference price did not converge")


# --------------------------------------------------------------------------
# exponential utility


def _entropy_argmax(m: FiniteMarket, gamma: float, B, q0=None):
    """``argmax_Q E_Q[B] - H(Q|P)/gamma`` over the polytope, by projected Newton."""
    p = m.probs
    poly = martingale_polytope(m)
    face = PolytopeFace(poly)
    q0 = poly.interior_point if q0 is None else q0

    def J(q):
        return relative_entropy(q, p) / gamma - float(q @ B)

    def grad(q):
        return (np.log(q / p) + 1.0) / gamma - B

    q = projected_newton(J, grad, lambda q: 1.0 / (gamma * q), q0, poly, face, VI_TOL)
    return q, -J(q)


def price_exponential(m: FiniteMarket, gamma: float, B=None, x: float = 0.0,
                      check: bool = True) -> float:
    """``(1/gamma) log(U_B(0) / U_0(0))`` through the log-domain primal.

    With ``check`` the same price is recomputed from the entropy form
    ``max_Q E_Q[B] - (H(Q|P) - min H)/gamma`` and the two must agree within
    1e-8.  The price does not depend on x.
    """
    B = _claim_vector(m, B)
    ds = m.delta_s[:, np.abs(m.delta_s).max(axis=0) > 0] if m.n_assets else m.delta_s
    _, log_b, _, _ = exponential_log_value(ds, m.probs, gamma, B, 0.0)
    _, log_0, _, _ = exponential_log_value(ds, m.probs, gamma, np.zeros_like(B), 0.0)
    closed = (log_b - log_0) / gamma
    if check:
        _, top_b = _entropy_argmax(m, gamma, B)
        _, top_0 = _entropy_argmax(m, gamma, np.zeros_like(B))
        dual = top_b - top_0
        if abs(dual - closed) > ROUTE_TOL * max(1.0, abs(closed)):
            raise ConvergenceError(
                f"exponential price routes disagree: log-value {closed!r}, entropy {dual!r}"
            )
    return closed


# --------------------------------------------------------------------------
# penalty


class Penalty:
    """Minimal penalty ``alpha(Q)`` for a fixed market, utility and wealth.

    ``U_0(x)`` is solved once.  For a given Q the infimum over lambda is the
    root of ``k(lambda) = lambda F'(lambda) - F(lambda) = -U_0(x)`` where
    ``F(lambda) = E[Phi(lambda dQ/dP)]``; k is increasing, and the root is
    found by safeguarded Newton in ``log lambda``.
    """

    def __init__(self, m: FiniteMarket, u: UtilityFunction, x: Optional[float] = None):
        self.market = m
        self.u = u
        self.x = m.x0 if x is None else float(x)
        self.u0 = maximize(m, u, 0.0, self.x).value
        self.probs = m.probs
        self._last_s = 0.0
        self._cache_key = None
        self._cache_lam = math.nan

    def _terms(self, lam, dens):
        u, p = self.u, self.probs
        pos = dens > 0
        y = lam * dens[pos]
        F = float(p[pos] @ u.phi(y)) + float(p[~pos].sum()) * u.u_infinity if (~pos).any() \
            else float(p @ u.phi(y))
        Fp = float((p[pos] * dens[pos]) @ u.phi_prime(y))
        Fpp = float((p[pos] * dens[pos] ** 2) @ u.phi_second(y))
        return F, Fp, Fpp

    def lambda_star(self, q) -> float:
        q = np.asarray(q, dtype=float)
        key = q.tobytes()
        if key == self._cache_key:
            return self._cache_lam
        lam = self._solve_lambda(q / self.probs)
        self._cache_key, self._cache_lam = key, lam
        return lam

    def _solve_lambda(self, dens) -> float:
        def k(s):
            lam = math.exp(s)
            F, Fp, Fpp = self._terms(lam, dens)
            return lam * Fp - F + self.u0, lam * lam * Fpp

        # warm start: consecutive calls come from nearby measures
        s = self._last_s
        lo, hi = s - 0.5, s + 0.5
        k_lo, _ = k(lo)
        k_hi, _ = k(hi)
        while k_lo > 0 and lo > -80:
            lo -= 4.0
            k_lo, _ = k(lo)
        while k_hi < 0 and hi < 80:
            hi += 4.0
            k_hi, _ = k(hi)
        if not (k_lo <= 0 <= k_hi):
            return math.inf
        if not lo < s < hi:
            s = 0.5 * (lo + hi)
        for _ in range(200):
            val, dval = k(s)
            if val == 0:
                break
            if val < 0:
                lo = s
            else:
                hi = s
            s_new = s - val / dval if dval > 0 and math.isfinite(dval) else 0.5 * (lo + hi)
            if not (lo < s_new < hi):
                s_new = 0.5 * (lo + hi)
            if abs(s_new - s) <= 1e-15 * max(1.0, abs(s)):
                s = s_new
                break
            s = s_new
        self._last_s = s
        return math.exp(s)

    def __call__(self, q) -> float:
        q = np.asarray(q, dtype=float)
        lam = self.lambda_star(q)
        if not math.isfinite(lam):
            return math.inf
        F, _, _ = self._terms(lam, q / self.probs)
        return self.x + (F - self.u0) / lam

    def gradient(self, q):
        """``Phi'(lambda* dQ/dP)`` (envelope theorem) and the matching diagonal curvature."""
        q = np.asarray(q, dtype=float)
        lam = self.lambda_star(q)
        y = lam * q / self.probs
        return np.asarray(self.u.phi_prime(y), dtype=float), lam * np.asarray(self.u.phi_second(y)) / self.probs


def penalty(m: FiniteMarket, u: UtilityFunction, Q, x: Optional[float] = None) -> float:
    q = Q.q if isinstance(Q, MartingaleMeasure) else np.asarray(Q, dtype=float)
    return Penalty(m, u, x)(q)


# --------------------------------------------------------------------------
# dual representation


@dataclass(frozen=True)
class DualPrice:
    price: float
    maximizers: list
    root_price: Optional[float] = None


def _dedupe(points, tol=1e-6):
    out = []
    for q in points:
        if not any(np.abs(q - r).max() <= tol for r in out):
            out.append(q)
    return out


def dual_price_representation(
    m: FiniteMarket,
    u: UtilityFunction,
    B=None,
    x: Optional[float] = None,
    restarts: int = RESTARTS,
    rng: Optional[np.random.Generator] = None,
    check: bool = True,
    alpha: Optional[Penalty] = None,
) -> DualPrice:
    """``max_Q E_Q[B] - alpha(Q)`` by projected Newton from several starts.

    The maximiser set is every local result within 1e-7 of the best value.
    With ``check`` the value is compared with the root-finding price.
    """
    B = _claim_vector(m, B)
    alpha = alpha or Penalty(m, u, x)
    rng = rng or np.random.default_rng(0)
    poly = martingale_polytope(m)
    face = PolytopeFace(poly)
    starts = [poly.interior_point] + list(poly.sample(rng, max(restarts - 1, 0)))

    def J(q):
        return alpha(q) - float(q @ B)

    def grad(q):
        return alpha.gradient(q)[0] - B

    def hess(q):
        return alpha.gradient(q)[1]

    found = []
    for q0 in starts:
        q = projected_newton(J, grad, hess, q0, poly, face, VI_TOL)
        found.append((-J(q), q))
    best = max(v for v, _ in found)
    argmax = _dedupe([q for v, q in found if v >= best - ARGMAX_TOL])
    root = None
    if check:
        root = price(m, u, B, alpha.x)
        if abs(root - best) > ARGMAX_TOL * max(1.0, abs(root)):
            raise ConvergenceError(
                f"dual representation {best!r} differs from root-finding price {root!r}"
            )
    return DualPrice(best, [MartingaleMeasure(q) for q in argmax], root)


# --------------------------------------------------------------------------
# bounds and asymptotics


@dataclass(frozen=True)
class PriceBounds:
    lower: float
    upper: float
    upper_measure: np.ndarray = field(repr=False, default=None)


def price_bounds(m: FiniteMarket, u: UtilityFunction, B=None, x: Optional[float] = None) -> PriceBounds:
    """``lower = E_{Q0}[B]`` at the B = 0 dual minimiser; ``upper = sup_Q E_Q[B]`` by LP.

    For a strictly concave utility the B = 0 minimiser is unique, so the
    lower bound is the maximum over the zero-penalty set.
    """
    B = _claim_vector(m, B)
    q0 = minimize_dual(m, u, 0.0, x, compute_gap=False).q_star.q
    upper, q_up = martingale_polytope(m).max_linear(B)
    return PriceBounds(float(q0 @ B), upper, q_up)


def _fast_price(m, u, B, x):
    if u.kind == "exponential":
        return price_exponential(m, u.gamma, B, x, check=False)
    return price(m, u, B, x)


def _extrapolate(t, f) -> float:
    """Value at t = 0 of the quadratic through the three points."""
    coef = np.polyfit(np.asarray(t, float), np.asarray(f, float), len(t) - 1)
    return float(coef[-1])


@dataclass(frozen=True)
class VolumeAsymptotics:
    slope0: float
    slope_inf: float
    zero_penalty_value: float
    lp_value: float
    large_volumes: tuple = LARGE_VOLUMES

    @property
    def slope0_error(self) -> float:
        return abs(self.slope0 - self.zero_penalty_value)

    @property
    def slope_inf_error(self) -> float:
        return abs(self.slope_inf - self.lp_value)


def volume_asymptotics(m: FiniteMarket, u: UtilityFunction, B=None, x: Optional[float] = None,
                       bounds: Optional[PriceBounds] = None) -> VolumeAsymptotics:
    """Richardson-extrapolated limits of ``pi(bB)/b`` as b -> 0 and b -> inf.

    Exponential utility uses the log-domain value, which stays finite for
    large b.  The estimates are returned next to their theoretical targets.
    """
    B = _claim_vector(m, B)
    bounds = bounds or price_bounds(m, u, B, x)
    small = [_fast_price(m, u, b * B, x) / b for b in SMALL_VOLUMES]
    slope0 = _extrapolate(SMALL_VOLUMES, small)
    volumes = np.array(LARGE_VOLUMES)
    while True:
        # a generic utility has no log-domain form: shrink the volumes until u stays finite
        try:
            large = [_fast_price(m, u, b * B, x) / b for b in volumes]
            break
        except (ConvergenceError, FloatingPointError, OverflowError):
            if volumes[0] <= 1.0:
                raise
            volumes = volumes / 10.0
    slope_inf = _extrapolate(1.0 / volumes, large)
    return VolumeAsymptotics(slope0, slope_inf, bounds.lower, bounds.upper, tuple(volumes.tolist()))


# --------------------------------------------------------------------------
# risk-measure properties


@dataclass
class AxiomReport:
    convexity: float = 0.0
    rho_convexity: float = 0.0
    monotonicity: float = 0.0
    translation: float = 0.0
    fatou: float = 0.0
    n_pairs: int = 0

    def passed(self, tol: float = 1e-8, fatou_tol: float = 1e-7) -> bool:
        return (
            max(self.convexity, self.rho_convexity, self.monotonicity, self.translation) <= tol
            and self.fatou <= fatou_tol
        )


def _fatou_residual(pi, B) -> float:
    """Truncations ``B ^ n`` on a doubling grid of levels must give increasing prices reaching pi(B)."""
    lo, hi = float(B.min()), float(B.max())
    if hi == lo:
        return 0.0
    levels = []
    step = (hi - lo) / 64.0
    level = lo + step
    while level < hi:
        levels.append(level)
        step *= 2.0
        level = lo + step
    levels.append(hi)
    prices = [pi(np.minimum(B, n)) for n in levels]
    worst = 0.0
    for a, b in zip(prices, prices[1:]):
        worst = max(worst, a - b)  # must be nondecreasing
    return max(worst, abs(prices[-1] - pi(B)))


def risk_measure_axioms(
    m: FiniteMarket,
    u: UtilityFunction,
    x: Optional[float] = None,
    sample_claims: Optional[Sequence] = None,
    rng: Optional[np.random.Generator] = None,
    n_pairs: int = 10,
    shifts: Sequence[float] = (-10.0, 0.5, 7.0),
) -> AxiomReport:
    """Worst residual of each price axiom over pairs of claims.

    Residuals are one-sided violations: convexity of pi and of
    ``rho(B) = pi(-B)``, monotonicity along ``B2 = B1 + nonnegative``,
    exact translation by constants, and continuity from below along
    truncations.
    """
    rng = rng or np.random.default_rng(0)
    n = m.n_states
    if sample_claims is None:
        sample_claims = [(rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)) for _ in range(n_pairs)]

    x = m.x0 if x is None else float(x)
    u0 = maximize(m, u, 0.0, x).value

    def pi(B):
        return price(m, u, B, x, u0=u0)

    rep = AxiomReport(n_pairs=len(sample_claims))
    for b1, b2 in sample_claims:
        b1 = np.asarray(b1, dtype=float)
        b2 = np.asarray(b2, dtype=float)
        t = float(rng.uniform(0.05, 0.95))
        p1, p2 = pi(b1), pi(b2)
        rep.convexity = max(rep.convexity, pi(t * b1 + (1 - t) * b2) - (t * p1 + (1 - t) * p2))
        r1, r2 = pi(-b1), pi(-b2)
        rep.rho_convexity = max(rep.rho_convexity, pi(-(t * b1 + (1 - t) * b2)) - (t * r1 + (1 - t) * r2))
        upper = b1 + rng.uniform(0, 1, n)
        rep.monotonicity = max(rep.monotonicity, p1 - pi(upper))
        for c in shifts:
            rep.translation = max(rep.translation, abs(pi(b1 + c) - p1 - c))
        rep.fatou = max(rep.fatou, _fatou_residual(pi, b1))
    return rep


# --------------------------------------------------------------------------
# full report


@dataclass(frozen=True)
class PriceReport:
    price: float
    penalty_at: list  # (MartingaleMeasure, alpha) pairs at sampled measures
    argmax_measures: list
    lower_bound: float
    upper_bound: float
    slope_at_zero: float
    slope_at_infinity: float
    replicable: bool = False


def price_report(m: FiniteMarket, u: UtilityFunction, B=None, x: Optional[float] = None,
                 n_samples: int = 5, rng: Optional[np.random.Generator] = None) -> PriceReport:
    from .market import replicable

    B = _claim_vector(m, B)
    rng = rng or np.random.default_rng(0)
    alpha = Penalty(m, u, x)
    rep = dual_price_representation(m, u, B, x, rng=rng, alpha=alpha)
    bounds = price_bounds(m, u, B, x)
    asym = volume_asymptotics(m, u, B, x, bounds)
    poly = martingale_polytope(m)
    samples = [poly.interior_point] + list(poly.sample(rng, n_samples))
    pens = [(MartingaleMeasure(q), alpha(q)) for q in samples]
    return PriceReport(
        price=rep.root_price,
        penalty_at=pens,
        argmax_measures=rep.maximizers,
        lower_bound=bounds.lower,
        upper_bound=bounds.upper,
        slope_at_zero=asym.slope0,
        slope_at_infinity=asym.slope_inf,
        replicable=replicable(m, B) is not None,
    )


def subdifferential_residual(m: FiniteMarket, u: UtilityFunction, B, x: float, pi: float, Q) -> float:
    """Optimality residual of Q for the B-problem at wealth ``x + pi`` (lambda re-solved)."""
    from .dual import lambda_foc

    q = Q.q if isinstance(Q, MartingaleMeasure) else np.asarray(Q, dtype=float)
    B = _claim_vector(m, B)
    lam = lambda_foc(u, q / m.probs, m.probs, x + pi - q @ B)
    return q_variational_residual(u, lam, q, m.probs, B, martingale_polytope(m))
