"""One-period market ``S1 = Y Z`` with ``Y ~ Exp(1)`` independent of a discrete Z.

Z takes values in (-1, 1] with an atom at 1.  For the exponential utility
the optimal position sits at the right end of the finiteness interval, and
the dual optimiser then carries singular mass.  Only scalar quantities are
computed: the singular mass comes from the budget identity
``E_{Q^r}[f_B] = Q^s(-B) + ||Q^s||``.

Per-atom integrals ``int_0^inf y^k exp(-gamma h z y + gamma B(y, z)) e^{-y} dy``
are available in closed form whenever B is linear in y on the atom, and by
adaptive quadrature otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import optimize, special

from ._quadrature import gauss_kronrod
from .market import MarketValidationError
from .utility import ExpTailVariable, exp_moment_abscissa, exponential_utility

__all__ = [
    "ZeroClaim",
    "DeltaYClaim",
    "BoundedAlphaClaim",
    "MonotonicityError",
    "ExpMixtureMarket",
    "OptimalH",
    "RegularDensity",
    "SingularBounds",
    "g",
    "g_prime",
    "optimal_h",
    "dual_regular_density",
    "singular_mass",
    "singular_bounds",
    "hedging_delta",
    "claim_stock_covariance",
    "atom_moment_quadrature",
]

TAIL_RTOL = 1e-16
QUAD_EPSREL = 1e-13
PANEL_MAX = 16.0
NEGLIGIBLE = 1e-18


@dataclass(frozen=True)
class ZeroClaim:
    pass


@dataclass(frozen=True)
class DeltaYClaim:
    delta: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise MarketValidationError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class BoundedAlphaClaim:
    """``B = alpha(Y, Z)`` with ``|alpha| <= bound``.

    ``alpha(y, z)`` must accept an array of y and a scalar z.  Pass
    ``constant`` when alpha is one number everywhere so closed forms apply.
    """

    alpha: Callable
    bound: float
    constant: Optional[float] = None

    @classmethod
    def constant_value(cls, c: float) -> "BoundedAlphaClaim":
        c = float(c)
        return cls(lambda y, z: np.full_like(np.asarray(y, dtype=float), c), abs(c), c)

    @classmethod
    def from_grid(cls, rows: Sequence[Sequence[float]]) -> "BoundedAlphaClaim":
        """Piecewise linear in y per atom from ``[y, z, value]`` rows."""
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise MarketValidationError("bounded_alpha grid rows must be [y, z, value]")
        tables = {}
        for zval in np.unique(arr[:, 1]):
            sub = arr[arr[:, 1] == zval]
            order = np.argsort(sub[:, 0])
            tables[float(zval)] = (sub[order, 0], sub[order, 2])

        def alpha(y, z):
            for key, (ys, vs) in tables.items():
                if math.isclose(key, z, rel_tol=0, abs_tol=1e-12):
                    return np.interp(np.asarray(y, dtype=float), ys, vs)
            raise KeyError(f"no alpha grid for atom z={z}")

        return cls(alpha, float(np.abs(arr[:, 2]).max()))


Claim = Union[ZeroClaim, DeltaYClaim, BoundedAlphaClaim]


class MonotonicityError(MarketValidationError):
    """g' is not positive up to the right end of the finiteness interval."""

    code = "not-monotone"


def default_atoms(n_atoms: int = 50, p1: float = 0.99, r: float = 0.1):
    """``z_1 = 1``, ``z_n = 1/n - 1``; geometric weights with the tail folded into atom N."""
    if n_atoms < 2:
        raise MarketValidationError("need at least two atoms")
    z = np.array([1.0] + [1.0 / k - 1.0 for k in range(2, n_atoms + 1)])
    rest = 1.0 - p1
    p = np.empty(n_atoms)
    p[0] = p1
    k = np.arange(n_atoms - 1)
    p[1:] = rest * (1 - r) * r ** k
    p[-1] += rest * r ** (n_atoms - 1)
    return z, p


@dataclass(frozen=True)
class ExpMixtureMarket:
    z: np.ndarray
    p: np.ndarray
    gamma: float = 1.0
    claim: Claim = field(default_factory=ZeroClaim)
    check_monotone: bool = True

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if z.shape != p.shape or z.ndim != 1:
            raise MarketValidationError("z and p must be 1-d arrays of equal length")
        if np.any(p <= 0):
            raise MarketValidationError("atom probabilities must be positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise MarketValidationError("atom probabilities must sum to 1")
        if np.any(z <= -1) or np.any(z > 1):
            raise MarketValidationError("Z must take values in (-1, 1]")
        if z[0] != 1.0:
            raise MarketValidationError("the first atom must be z = 1")
        if self.gamma <= 0:
            raise MarketValidationError("gamma must be positive")
        if self.gamma * self._delta >= 1:
            raise MarketValidationError("gamma * delta must be < 1 for the claim to be admissible")
        if isinstance(self.claim, BoundedAlphaClaim):
            _spot_check_bound(self.claim, z)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "p", p)
        if self.check_monotone:
            slope = g_prime(self, self.h_interval[1])
            if not slope > 0:
                raise MonotonicityError(
                    f"g'(h) = {slope:.3g} <= 0 at the right end h = {self.h_interval[1]:.6g}; "
                    "the weights p_n for n >= 2 do not decay fast enough"
                )

    @classmethod
    def default(cls, claim: Optional[Claim] = None, n_atoms: int = 50, p1: float = 0.99,
                      r: float = 0.1, gamma: float = 1.0, check_monotone: bool = True):
        z, p = default_atoms(n_atoms, p1, r)
        return cls(z, p, gamma, claim or ZeroClaim(), check_monotone)

    def with_claim(self, claim: Claim) -> "ExpMixtureMarket":
        return ExpMixtureMarket(self.z, self.p, self.gamma, claim, self.check_monotone)

    @property
    def _delta(self) -> float:
        return self.claim.delta if isinstance(self.claim, DeltaYClaim) else 0.0

    @property
    def h_interval(self) -> tuple[float, float]:
        """``(lo, hi]``: positions with a finite expected utility for any Z in (-1, 1]."""
        width = 1.0 / self.gamma - self._delta
        return -width, width

    @property
    def loss_variable(self) -> ExpTailVariable:
        return ExpTailVariable(1.0, 1.0, 1.0)

    @property
    def utility(self):
        return exponential_utility(self.gamma)

    def admissible(self, h: float) -> bool:
        lo, hi = self.h_interval
        return lo < h <= hi + 1e-15

    def has_closed_form(self) -> bool:
        return not isinstance(self.claim, BoundedAlphaClaim) or self.claim.constant is not None


def _spot_check_bound(claim: BoundedAlphaClaim, z) -> None:
    ys = np.linspace(0.0, 50.0, 201)
    for zn in z[: min(len(z), 10)]:
        vals = np.asarray(claim.alpha(ys, float(zn)), dtype=float)
        if np.any(np.abs(vals) > claim.bound * (1 + 1e-12)):
            raise MarketValidationError(f"alpha exceeds its declared bound on atom z={zn}")


# --------------------------------------------------------------------------
# per-atom integrals


def _rates(m: ExpMixtureMarket, h: float) -> np.ndarray:
    """Exponential decay rate of each atom's integrand in y."""
    return 1.0 + m.gamma * (h * m.z - m._delta)


def _closed_moments(m: ExpMixtureMarket, h: float, k: int) -> np.ndarray:
    a = _rates(m, h)
    shift = m.claim.constant if isinstance(m.claim, BoundedAlphaClaim) else 0.0
    return math.exp(m.gamma * shift) * math.factorial(k) / a ** (k + 1)


def _log_weight(m: ExpMixtureMarket, h: float, zn: float) -> Callable:
    """log of ``exp(-gamma h z y + gamma B(y, z)) e^{-y}`` as a function of y."""
    gam = m.gamma
    if isinstance(m.claim, BoundedAlphaClaim):
        alpha = m.claim.alpha
        return lambda y: -(1.0 + gam * h * zn) * y + gam * np.asarray(alpha(y, zn), dtype=float)
    rate = 1.0 + gam * (h * zn - m._delta)
    return lambda y: -rate * y


def _panel_quad(integrand: Callable, rate: float, log_bound: float, k: int) -> float:
    """Integrate over [0, y_max] in panels; integrand is O(y^k e^{-rate y} e^{log_bound})."""
    target = TAIL_RTOL * math.exp(-2.0 * log_bound)
    t_max = float(special.gammainccinv(k + 1, target)) if target > 1e-300 else 800.0
    y_max = t_max / rate
    # absolute tolerance relative to a lower bound on the whole integral
    scale = math.exp(-log_bound) * math.factorial(k) / rate ** (k + 1)
    edges = [0.0]
    step = 0.5 / rate
    while edges[-1] < y_max:
        edges.append(min(y_max, edges[-1] + min(step, PANEL_MAX)))
        step *= 2.0
    val, _ = gauss_kronrod(integrand, edges, epsabs=1e-3 * TAIL_RTOL * scale, epsrel=QUAD_EPSREL)
    return val


def atom_moment_quadrature(log_weight: Callable, rate: float, log_bound: float, k: int) -> float:
    """``int_0^inf y^k exp(log_weight(y)) dy`` where ``|log_weight(y) + rate y| <= log_bound``.

    The range is cut at y_max where the relative tail bound
    ``e^{2 log_bound} Gamma(k+1, rate y_max) / k!`` drops below 1e-16, and
    split into panels whose width doubles up to a cap.
    """
    if rate <= 0:
        return math.inf
    return _panel_quad(lambda y: y ** k * np.exp(log_weight(y)), rate, log_bound, k)


def _decay_rates(m: ExpMixtureMarket, h: float) -> np.ndarray:
    """Rates for the quadrature cut-off; alpha's share is covered by its bound."""
    if isinstance(m.claim, BoundedAlphaClaim):
        return 1.0 + m.gamma * h * m.z
    return _rates(m, h)


def _quad_moments(m: ExpMixtureMarket, h: float, k: int) -> np.ndarray:
    rates = _decay_rates(m, h)
    bound = m.gamma * m.claim.bound if isinstance(m.claim, BoundedAlphaClaim) else 0.0
    out = np.zeros(m.z.size)
    # atoms whose weighted contribution is provably below 1e-18 of atom 1 are left at 0
    upper = m.p * np.exp(bound) * math.factorial(k) / rates ** (k + 1)
    lower_first = m.p[0] * math.exp(-bound) * math.factorial(k) / rates[0] ** (k + 1)
    for n, (zn, a) in enumerate(zip(m.z, rates)):
        if n > 0 and upper[n] < NEGLIGIBLE * lower_first:
            continue
        out[n] = atom_moment_quadrature(_log_weight(m, h, float(zn)), float(a), bound, k)
    return out


def _moments(m: ExpMixtureMarket, h: float, k: int, route: str = "auto") -> np.ndarray:
    if route == "closed" or (route == "auto" and m.has_closed_form()):
        if not m.has_closed_form():
            raise ValueError("no closed form for a non-constant alpha claim")
        return _closed_moments(m, h, k)
    return _quad_moments(m, h, k)


# --------------------------------------------------------------------------
# value function in h


def g(m: ExpMixtureMarket, h: float, route: str = "auto") -> float:
    """``E[-exp(-gamma (h S1 - B))]``; ``-inf`` outside the finiteness interval."""
    if not m.admissible(h):
        return -math.inf
    return -float(m.p @ _moments(m, h, 0, route))


def g_prime(m: ExpMixtureMarket, h: float, route: str = "auto") -> float:
    """``gamma E[S1 exp(-gamma (h S1 - B))]``."""
    if not m.admissible(h):
        return -math.inf
    return m.gamma * float((m.p * m.z) @ _moments(m, h, 1, route))


@dataclass(frozen=True)
class OptimalH:
    h_star: float
    attained_at_boundary: bool
    slope: float


def optimal_h(m: ExpMixtureMarket) -> OptimalH:
    """Maximiser of g over the finiteness interval.

    g is concave, so ``g'(hi) > 0`` means the optimum is the right end.
    Otherwise (only reachable with ``check_monotone=False``) the interior
    root of g' is found by bracketing.
    """
    lo, hi = m.h_interval
    slope = g_prime(m, hi)
    if slope > 0:
        return OptimalH(hi, True, slope)
    a = lo + 1e-9 * (hi - lo)
    h = optimize.brentq(lambda t: g_prime(m, t), a, hi, xtol=1e-14)
    return OptimalH(h, False, g_prime(m, h))


# --------------------------------------------------------------------------
# dual side


@dataclass(frozen=True)
class RegularDensity:
    """``dQ^r/dP = exp(-gamma h* S1 + gamma B) / normaliser`` atom by atom."""

    market: ExpMixtureMarket
    h_star: float
    normalizer: float
    atom_mass: np.ndarray

    def density(self, y, atom: int):
        """Density of Q^r with respect to P on atom ``atom`` at level y."""
        m = self.market
        lw = _log_weight(m, self.h_star, float(m.z[atom]))
        y = np.asarray(y, dtype=float)
        return np.exp(lw(y) + y) / self.normalizer

    def total_mass(self, route: str = "auto") -> float:
        return float(self.market.p @ _moments(self.market, self.h_star, 0, route)) / self.normalizer

    def expect_y_power(self, k: int, route: str = "auto") -> np.ndarray:
        """Per-atom ``E_Q[Y^k 1{Z = z_n}]``."""
        return self.market.p * _moments(self.market, self.h_star, k, route) / self.normalizer

    def relative_entropy(self, route: str = "auto") -> float:
        """``H(Q^r | P) = E_Q[-gamma h* S1 + gamma B] - log(normaliser)``."""
        m = self.market
        gam, h = m.gamma, self.h_star
        if route == "quad" or (route == "auto" and not m.has_closed_form()):
            return self._entropy_quad()
        mass_y = self.expect_y_power(1, "closed")
        mean_exponent = float(np.sum(mass_y * (-gam * h * m.z + gam * m._delta)))
        if isinstance(m.claim, BoundedAlphaClaim):
            mean_exponent += gam * m.claim.constant
        return mean_exponent - math.log(self.normalizer)

    def _entropy_quad(self) -> float:
        m = self.market
        bound = m.gamma * m.claim.bound if isinstance(m.claim, BoundedAlphaClaim) else 0.0
        rates = _decay_rates(m, self.h_star)
        log_norm = math.log(self.normalizer)
        total = 0.0
        for zn, pn, rate, mass in zip(m.z, m.p, rates, self.atom_mass):
            if mass < NEGLIGIBLE * self.atom_mass[0]:
                continue
            lw = _log_weight(m, self.h_star, float(zn))
            # log dQ/dP on this atom is lw(y) + y - log N
            val = _weighted_quad(lambda y, lw=lw: lw(y) + y - log_norm, lw, float(rate), bound)
            total += pn * val / self.normalizer
        return total


def _weighted_quad(fn, log_weight, rate, log_bound) -> float:
    """``int fn(y) exp(log_weight(y)) dy`` for fn of at most linear growth."""
    return _panel_quad(lambda y: fn(y) * np.exp(log_weight(y)), rate, log_bound, 1)


def dual_regular_density(m: ExpMixtureMarket, route: str = "auto") -> RegularDensity:
    h = optimal_h(m).h_star
    mom = _moments(m, h, 0, route)
    norm = float(m.p @ mom)
    if not math.isfinite(norm):
        raise ValueError("normaliser of the regular density diverges")
    return RegularDensity(m, h, norm, m.p * mom / norm)


def singular_mass(m: ExpMixtureMarket, route: str = "formula") -> float:
    """``Q^s(-B) + ||Q^s||``, which the budget identity equates to ``E_{Q^r}[f_B]``.

    ``route="formula"``: ``h* g'(h*) / (gamma E[exp(-gamma h* S1 + gamma B)])``
    with closed-form integrals where available.  ``route="quadrature"``:
    every integral by quadrature, ``E_{Q^r}[h* S1]`` directly.
    """
    if route == "formula":
        h = optimal_h(m).h_star
        norm = -g(m, h)
        return h * g_prime(m, h) / (m.gamma * norm)
    if route == "quadrature":
        dens = dual_regular_density(m, route="quad")
        return dens.h_star * float(m.z @ dens.expect_y_power(1, "quad"))
    raise ValueError(f"unknown route {route!r}")


@dataclass(frozen=True)
class SingularBounds:
    """Bounds on the singular action, as multiples of the budget-identity mass.

    ``lower <= Q^s(-B) <= upper`` and ``norm_lower <= ||Q^s|| <= norm_upper``.
    """

    L: float
    l: float
    lower: float
    upper: float
    norm_lower: float
    norm_upper: float
    claim_action_zero: bool


def _claim_tails(m: ExpMixtureMarket):
    if isinstance(m.claim, DeltaYClaim):
        return ExpTailVariable(0.0, m.claim.delta, 1.0), None
    return None, None


def singular_bounds(m: ExpMixtureMarket) -> SingularBounds:
    u = m.utility
    pos, neg = _claim_tails(m)
    L = exp_moment_abscissa(pos, u)
    l = exp_moment_abscissa(neg, u)
    mass = singular_mass(m)
    inv_L = 0.0 if math.isinf(L) else 1.0 / L
    inv_l = 0.0 if math.isinf(l) else 1.0 / l
    # mass = Q^s(-B) + ||Q^s|| with -||Q^s||/L <= Q^s(-B) <= ||Q^s||/l
    norm_upper = mass / (1.0 - inv_L) if inv_L < 1 else math.inf
    norm_lower = mass / (1.0 + inv_l)
    zero = math.isinf(L) and math.isinf(l)
    return SingularBounds(
        L=L, l=l,
        lower=-inv_L * norm_upper + 0.0,  # + 0.0 turns -0.0 into 0.0
        upper=inv_l * norm_upper,
        norm_lower=norm_lower,
        norm_upper=norm_upper,
        claim_action_zero=zero,
    )


def hedging_delta(with_claim: ExpMixtureMarket, without_claim: ExpMixtureMarket) -> float:
    """Extra shares held because of the claim: ``h*_B - h*_0``."""
    return optimal_h(with_claim).h_star - optimal_h(without_claim).h_star


def claim_stock_covariance(m: ExpMixtureMarket) -> float:
    """``Cov(B, S1)`` under P."""
    ez = float(m.p @ m.z)
    if isinstance(m.claim, ZeroClaim):
        return 0.0
    if isinstance(m.claim, DeltaYClaim):
        # Cov(dY, YZ) = d E[Z] Var(Y) and Var(Y) = 1
        return m.claim.delta * ez
    if m.claim.constant is not None:
        return 0.0
    alpha = m.claim.alpha
    e_b = e_bs = 0.0
    for zn, pn in zip(m.z, m.p):
        b0 = _panel_quad(lambda y, zn=zn: alpha(y, zn) * np.exp(-y), 1.0, 0.0, 0)
        b1 = _panel_quad(lambda y, zn=zn: alpha(y, zn) * y * np.exp(-y), 1.0, 0.0, 1)
        e_b += pn * b0
        e_bs += pn * zn * b1
    return e_bs - e_b * ez
