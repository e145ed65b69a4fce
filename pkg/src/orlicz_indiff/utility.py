"""Utilities, convex conjugates, Young functions and Orlicz norms.

Everything here is pointwise or works on finite distributions.  The
exponential utility ``u(x) = -exp(-gamma x)`` gets closed forms; any other
increasing concave function can be wrapped with :func:`custom_utility`, in
which case the conjugate is computed numerically.

Extended reals are plain floats: ``math.inf`` and ``-math.inf`` are the
values of Phi(0) for unbounded utilities, of divergent moments, etc.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import optimize, special

__all__ = [
    "UtilityFunction",
    "YoungPair",
    "DiscreteDistribution",
    "ExpTailVariable",
    "AdmissibilityReport",
    "exponential_utility",
    "custom_utility",
    "conjugate",
    "young_pair",
    "luxemburg_norm",
    "orlicz_dual_norm",
    "exp_moment_abscissa",
    "claim_admissible",
]

ArrayLike = Union[float, Sequence[float], np.ndarray]

NORM_RTOL = 1e-12
NORM_MAXITER = 200
EPS_SEARCH_MAX_K = 40


@dataclass(frozen=True)
class UtilityFunction:
    """A utility ``u`` bundled with its conjugate ``Phi(y) = sup_x u(x) - x y``.

    All callables accept scalars or numpy arrays.  ``beta`` is the left
    derivative of ``u`` at 0, which is where the complementary Young function
    stops being flat.
    """

    u: Callable
    u_prime: Callable
    u_second: Callable
    phi: Callable
    phi_prime: Callable
    phi_second: Callable
    beta: float
    u_infinity: float
    kind: str = "custom"
    gamma: Optional[float] = None
    strictly_concave: bool = True

    def u_hat(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        return -self.u(-x) + self.u(0.0)

    def phi_hat(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        out = np.zeros_like(y)
        big = y > self.beta
        if np.any(big):
            out[big] = self.phi(y[big]) - self.u(0.0)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class YoungPair:
    """The complementary pair (u_hat, Phi_hat) generated by a utility."""

    u_hat: Callable
    phi_hat: Callable
    beta: float
    utility: UtilityFunction = field(repr=False)


@dataclass(frozen=True)
class DiscreteDistribution:
    """A random variable on a finite probability space."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if values.shape != probs.shape or values.ndim != 1:
            raise ValueError("values and probs must be 1-d arrays of equal length")
        if np.any(probs <= 0):
            raise ValueError("all probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_atoms(cls, atoms):
        vals, probs = zip(*atoms)
        return cls(np.array(vals), np.array(probs))

    def expect(self, fn=None) -> float:
        vals = self.values if fn is None else fn(self.values)
        return float(np.dot(self.probs, vals))

    def scaled(self, t: float) -> "DiscreteDistribution":
        return DiscreteDistribution(t * self.values, self.probs)


@dataclass(frozen=True)
class ExpTailVariable:
    """Semi-analytic variable ``shift + scale * Y**power`` with ``Y ~ Exp(1)``.

    Only its exponential-moment behaviour is used: whether
    ``E[exp(t X^+)]`` is finite is decided in closed form.
    """

    shift: float = 0.0
    scale: float = 1.0
    power: float = 1.0

    def positive_part_tail(self) -> "ExpTailVariable | None":
        # B^+ inherits the unbounded tail only when scale > 0
        return self if self.scale > 0 else None

    def negative_part_tail(self) -> "ExpTailVariable | None":
        return ExpTailVariable(-self.shift, -self.scale, self.power) if self.scale < 0 else None

    def mgf_finite(self, t: float) -> bool:
        """Is ``E[exp(t * X)]`` finite (for the unbounded direction)?"""
        if t <= 0 or self.scale <= 0:
            return True
        if self.power < 1:
            return True
        if self.power > 1:
            return False
        return t * self.scale < 1.0


# --------------------------------------------------------------------------
# constructors


def exponential_utility(gamma: float = 1.0) -> UtilityFunction:
    """``u(x) = -exp(-gamma x)`` with its closed-form conjugate."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    g = float(gamma)

    def u(x):
        return -np.exp(-g * np.asarray(x, dtype=float))

    def u_prime(x):
        return g * np.exp(-g * np.asarray(x, dtype=float))

    def u_second(x):
        return -g * g * np.exp(-g * np.asarray(x, dtype=float))

    def phi(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(invalid="ignore"):
            out = special.xlogy(y / g, y / g) - y / g
        out = np.where(y < 0, np.inf, out)
        return out if out.ndim else float(out)

    def phi_prime(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.log(y / g) / g
        return out if out.ndim else float(out)

    def phi_second(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            out = 1.0 / (g * y)
        return out if out.ndim else float(out)

    return UtilityFunction(
        u=u,
        u_prime=u_prime,
        u_second=u_second,
        phi=phi,
        phi_prime=phi_prime,
        phi_second=phi_second,
        beta=g,
        u_infinity=0.0,
        kind="exponential",
        gamma=g,
    )


def _numeric_derivative(fn, h=1e-5):
    def d(x):
        x = np.asarray(x, dtype=float)
        return (fn(x + h) - fn(x - h)) / (2 * h)

    return d


def _estimate_u_infinity(u) -> float:
    prev = float(u(1.0))
    x = 1.0
    for _ in range(60):
        x *= 2.0
        cur = float(u(x))
        if not math.isfinite(cur):
            return math.inf
        if abs(cur - prev) <= 1e-13 * max(1.0, abs(cur)):
            return cur
        prev = cur
        if x > 1e15:
            break
    # still moving at x ~ 1e15: treat as unbounded above
    return math.inf if cur > 1e6 else cur


def custom_utility(
    u: Callable,
    u_prime: Optional[Callable] = None,
    u_second: Optional[Callable] = None,
    u_infinity: Optional[float] = None,
    strictly_concave: bool = True,
) -> UtilityFunction:
    """Wrap an arbitrary increasing concave ``u``; Phi is computed numerically."""
    up = u_prime or _numeric_derivative(u)
    upp = u_second or _numeric_derivative(up, h=1e-4)
    u_inf = _estimate_u_infinity(u) if u_infinity is None else float(u_infinity)

    def _vec(fn):
        def wrapped(y):
            y = np.asarray(y, dtype=float)
            out = np.vectorize(fn, otypes=[float])(y)
            return out if out.ndim else float(out)

        return wrapped

    def phi_scalar(y):
        return _conjugate_numeric(u, up, u_inf, float(y))[0]

    def phi_prime_scalar(y):
        if y <= 0:
            return -math.inf
        return -_conjugate_numeric(u, up, u_inf, float(y))[1]

    def phi_second_scalar(y):
        if y <= 0:
            return math.inf
        x_star = _conjugate_numeric(u, up, u_inf, float(y))[1]
        curv = float(upp(x_star))
        return math.inf if curv == 0 else -1.0 / curv

    return UtilityFunction(
        u=u,
        u_prime=up,
        u_second=upp,
        phi=_vec(phi_scalar),
        phi_prime=_vec(phi_prime_scalar),
        phi_second=_vec(phi_second_scalar),
        beta=float(up(0.0)),
        u_infinity=u_inf,
        kind="custom",
        strictly_concave=strictly_concave,
    )


# --------------------------------------------------------------------------
# conjugate


def _conjugate_numeric(u, u_prime, u_inf, y: float) -> tuple[float, float]:
    """Return ``(Phi(y), argmax_x)`` for ``x -> u(x) - x y``."""
    if y < 0:
        return math.inf, math.nan
    if y == 0:
        return u_inf, math.inf

    def slope(x):
        return float(u_prime(x)) - y

    # slope is nonincreasing; bracket its root by expanding outwards
    lo, hi = -1.0, 1.0
    for _ in range(80):
        if slope(lo) >= 0:
            break
        lo *= 2.0
    for _ in range(80):
        if slope(hi) <= 0:
            break
        hi *= 2.0
    if slope(lo) >= 0 >= slope(hi):
        try:
            x_star = optimize.brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
            return float(u(x_star)) - x_star * y, x_star
        except (ValueError, RuntimeError):
            pass
    # golden section on the concave objective over the expanded bracket
    res = optimize.minimize_scalar(
        lambda x: -(float(u(x)) - x * y), bracket=(lo, 0.5 * (lo + hi), hi), method="golden",
        options={"xtol": 1e-12},
    )
    return -float(res.fun), float(res.x)


def conjugate(u: UtilityFunction, y: float) -> float:
    """Convex conjugate ``Phi(y) = sup_x {u(x) - x y}``.

    Returns ``math.inf`` where the supremum is infinite.
    """
    if y < 0:
        raise ValueError("the conjugate is only used on y >= 0")
    if y == 0:
        return float(u.u_infinity)
    return float(u.phi(y))


def young_pair(u: UtilityFunction) -> YoungPair:
    return YoungPair(u_hat=u.u_hat, phi_hat=u.phi_hat, beta=u.beta, utility=u)


# --------------------------------------------------------------------------
# norms


def _as_yp(yp: Union[YoungPair, UtilityFunction]) -> YoungPair:
    return young_pair(yp) if isinstance(yp, UtilityFunction) else yp


def luxemburg_norm(f: DiscreteDistribution, yp: Union[YoungPair, UtilityFunction]) -> float:
    """``inf{c > 0 : E[u_hat(f / c)] <= 1}`` by bracketing and bisection."""
    yp = _as_yp(yp)
    absf = np.abs(f.values)
    if not np.any(absf > 0):
        return 0.0

    def modular(c):
        with np.errstate(over="ignore"):
            return float(np.dot(f.probs, yp.u_hat(absf / c)))

    hi = float(absf.max())
    while modular(hi) > 1.0:
        hi *= 2.0
    lo = hi
    while modular(lo) <= 1.0:
        lo *= 0.5
    for _ in range(NORM_MAXITER):
        if hi - lo <= NORM_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if modular(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def orlicz_dual_norm(g: DiscreteDistribution, yp: Union[YoungPair, UtilityFunction]) -> float:
    """``sup{E|f g| : E[u_hat(f)] <= 1}`` on a finite space.

    At the optimum ``|g_i| = mu * u_hat'(f_i)``, i.e. ``f_i = Phi'(|g_i| / mu)``
    clipped at 0, and the constraint binds.  ``mu`` is found by bisection in
    log scale; SLSQP is the fallback when that bracket cannot be formed.
    """
    yp = _as_yp(yp)
    util = yp.utility
    absg = np.abs(g.values)
    p = g.probs
    if not np.any(absg > 0):
        return 0.0

    def f_of(mu):
        with np.errstate(divide="ignore", invalid="ignore"):
            f = util.phi_prime(absg / mu)
        return np.maximum(np.nan_to_num(np.asarray(f, dtype=float), nan=0.0, neginf=0.0), 0.0)

    def excess(log_mu):
        f = f_of(math.exp(log_mu))
        with np.errstate(over="ignore"):
            return float(np.dot(p, yp.u_hat(f))) - 1.0

    try:
        lo, hi = -1.0, 1.0
        for _ in range(200):
            if excess(lo) > 0:
                break
            lo -= 2.0
        for _ in range(200):
            if excess(hi) < 0:
                break
            hi += 2.0
        log_mu = optimize.brentq(excess, lo, hi, xtol=1e-15, maxiter=500)
        f = f_of(math.exp(log_mu))
        return float(np.dot(p, absg * f))
    except (ValueError, RuntimeError):
        return _dual_norm_slsqp(absg, p, yp)


def _dual_norm_slsqp(absg, p, yp: YoungPair) -> float:
    n = absg.size
    cons = {"type": "ineq", "fun": lambda f: 1.0 - float(np.dot(p, yp.u_hat(f)))}
    res = optimize.minimize(
        lambda f: -float(np.dot(p, absg * f)),
        np.full(n, 0.1),
        method="SLSQP",
        bounds=[(0, None)] * n,
        constraints=[cons],
        options={"ftol": 1e-14, "maxiter": 1000},
    )
    return -float(res.fun)


# --------------------------------------------------------------------------
# claim admissibility

Claim = Union[DiscreteDistribution, ExpTailVariable, np.ndarray, Sequence[float]]


@dataclass(frozen=True)
class AdmissibilityReport:
    gains: bool
    positive_bound: bool
    eps_condition: Optional[bool]  # None: inconclusive down to eps = 2**-40
    eps: Optional[float]
    L: float
    l: float
    notes: tuple = ()

    @property
    def admissible(self) -> bool:
        return self.gains and bool(self.eps_condition)


def _umoment_finite(u: UtilityFunction, var: Optional[ExpTailVariable], alpha: float) -> Optional[bool]:
    """Is ``E[u_hat(alpha X)] < inf`` for the unbounded part ``X``?  None if unknown."""
    if var is None or alpha <= 0:
        return True
    if u.kind == "exponential":
        # u_hat(x) = exp(gamma |x|) - 1
        return var.mgf_finite(u.gamma * alpha)
    return None


def exp_moment_abscissa(var: Optional[ExpTailVariable], u: UtilityFunction, cap: float = 1e12) -> float:
    """``sup{a > 0 : E[u_hat(a X)] < inf}`` by bisection on the finiteness test."""
    if _umoment_finite(u, var, cap):
        return math.inf
    if _umoment_finite(u, var, 1.0) is None:
        return math.nan
    lo, hi = 0.0, 1.0
    while _umoment_finite(u, var, hi):
        lo, hi = hi, 2.0 * hi
    for _ in range(NORM_MAXITER):
        if hi - lo <= NORM_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if _umoment_finite(u, var, mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def claim_admissible(B: Claim, u: UtilityFunction) -> AdmissibilityReport:
    """Check the integrability conditions a claim must meet before duality applies.

    Finite claims pass everything with ``L = l = inf``.  For semi-analytic
    :class:`ExpTailVariable` claims the exponential-moment tests are exact
    for the exponential utility and reported as inconclusive otherwise.
    """
    if not isinstance(B, ExpTailVariable):
        return AdmissibilityReport(True, True, True, 1.0, math.inf, math.inf)

    notes = []
    pos, neg = B.positive_part_tail(), B.negative_part_tail()
    gains = True
    if not math.isfinite(u.u_infinity) and neg is not None and neg.power > 1:
        # B^- outside L^1 is the only way gains can fail here
        gains = False
        notes.append("gains: B^- not integrable")
    finite_at_one = _umoment_finite(u, pos, 1.0)
    if finite_at_one is None:
        notes.append("divergent: moment test unavailable for custom utility")
        return AdmissibilityReport(gains, False, None, None, math.nan, math.nan, tuple(notes))
    L = exp_moment_abscissa(pos, u)
    l = exp_moment_abscissa(neg, u)

    eps_found = None
    for k in range(EPS_SEARCH_MAX_K + 1):
        eps = 2.0 ** -k
        if _umoment_finite(u, pos, 1.0 + eps):
            eps_found = eps
            break
    if eps_found is not None:
        eps_condition = True
    elif finite_at_one:
        eps_condition = None
        notes.append("eps-condition inconclusive down to 2**-40")
    else:
        eps_condition = False
    return AdmissibilityReport(gains, bool(finite_at_one), eps_condition, eps_found, L, l, tuple(notes))
