"""Finite one-period markets and their martingale-measure polytope."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .utility import ExpTailVariable, UtilityFunction, exp_moment_abscissa

__all__ = [
    "MarketValidationError",
    "ProbabilityNormalizationError",
    "ArbitrageError",
    "FiniteMarket",
    "MartingaleMeasure",
    "Polytope",
    "SuitabilityReport",
    "CompatibilityReport",
    "check_suitable",
    "check_compatible",
    "martingale_polytope",
    "replicable",
    "random_market",
    "loss_multiple",
]

PROB_TOL = 1e-12
MEASURE_TOL = 1e-10


class MarketValidationError(ValueError):
    """Raised when a market violates a construction invariant."""

    code = "invalid-market"


class ProbabilityNormalizationError(MarketValidationError):
    code = "probs-not-normalized"


class ArbitrageError(MarketValidationError):
    code = "arbitrage"


@dataclass(frozen=True)
class MartingaleMeasure:
    q: np.ndarray

    def density(self, probs) -> np.ndarray:
        return self.q / np.asarray(probs)

    def expect(self, x) -> float:
        return float(np.dot(self.q, x))


@dataclass(frozen=True)
class FiniteMarket:
    """n states, d assets.  ``delta_s[i, j]`` is the price increment of asset j in state i."""

    probs: np.ndarray
    delta_s: np.ndarray
    loss_variable: Optional[np.ndarray] = None
    x0: float = 0.0
    claim: Optional[np.ndarray] = None
    _interior: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if probs.ndim != 1 or probs.size < 2:
            raise MarketValidationError("a market needs at least two states")
        if np.any(probs <= 0):
            raise MarketValidationError("probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ProbabilityNormalizationError("probabilities must sum to 1")
        n = probs.size
        ds = np.asarray(self.delta_s, dtype=float)
        if ds.ndim == 1:
            ds = ds.reshape(n, 1) if ds.size == n else ds.reshape(n, -1)
        if ds.size == 0:
            ds = np.zeros((n, 0))
        if ds.shape[0] != n:
            raise MarketValidationError("delta_s must have one row per state")
        if self.loss_variable is None:
            w = 1.0 + (np.abs(ds).max(axis=1) if ds.shape[1] else np.zeros(n))
        else:
            w = np.asarray(self.loss_variable, dtype=float)
            if w.shape != (n,):
                raise MarketValidationError("loss variable must have one value per state")
            if np.any(w < 1):
                raise MarketValidationError("loss variable must be >= 1 in every state")
        claim = None
        if self.claim is not None:
            claim = np.asarray(self.claim, dtype=float)
            if claim.shape != (n,):
                raise MarketValidationError("claim must have one value per state")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "delta_s", ds)
        object.__setattr__(self, "loss_variable", w)
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "claim", claim)
        object.__setattr__(self, "_interior", _no_arbitrage_certificate(probs, ds))

    @property
    def n_states(self) -> int:
        return self.probs.size

    @property
    def n_assets(self) -> int:
        return self.delta_s.shape[1]

    @property
    def interior_point(self) -> np.ndarray:
        return self._interior.copy()

    def expect(self, x) -> float:
        return float(np.dot(self.probs, x))

    def with_claim(self, claim) -> "FiniteMarket":
        return FiniteMarket(self.probs, self.delta_s, self.loss_variable, self.x0, claim)


def _no_arbitrage_certificate(probs, ds) -> np.ndarray:
    n, d = ds.shape
    if d == 0:
        return probs.copy()
    if np.allclose(ds.T @ probs, 0.0, atol=1e-14):
        return probs.copy()
    # maximize t subject to q >= t, sum q = 1, q^T ds = 0
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_eq = np.zeros((d + 1, n + 1))
    a_eq[0, :n] = 1.0
    a_eq[1:, :n] = ds.T
    b_eq = np.zeros(d + 1)
    b_eq[0] = 1.0
    a_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = optimize.linprog(
        c, A_ub=a_ub, b_ub=np.zeros(n), A_eq=a_eq, b_eq=b_eq,
        bounds=[(0, None)] * n + [(None, 1.0)], method="highs",
    )
    if res.status != 0 or res.x[-1] <= 1e-12:
        raise ArbitrageError("no strictly positive martingale measure: the market admits arbitrage")
    q = res.x[:n]
    q = q / q.sum()
    # centre slightly towards p within the affine hull to get away from faces
    return _polish_interior(q, probs, ds)


def _polish_interior(q, probs, ds):
    a = np.vstack([np.ones(len(q)), ds.T])
    # project p onto the affine hull and move toward it while staying positive
    pinv = np.linalg.pinv(a)
    target = probs - pinv @ (a @ probs - np.r_[1.0, np.zeros(ds.shape[1])])
    direction = target - q
    t = 0.5
    for _ in range(60):
        cand = q + t * direction
        if np.all(cand > 0.1 * q.min()):
            return cand / cand.sum()
        t *= 0.5
    return q


# --------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class SuitabilityReport:
    suitable: bool
    strategy: Optional[np.ndarray]
    scale: float


def check_suitable(m: FiniteMarket) -> SuitabilityReport:
    """``|dS^j| <= W`` in every state for every asset, with H = 1 as witness.

    When it fails, ``scale`` is the smallest multiple of W that would pass.
    """
    if m.n_assets == 0:
        return SuitabilityReport(True, np.zeros(0), 0.0)
    ratio = float((np.abs(m.delta_s) / m.loss_variable[:, None]).max())
    if ratio <= 1.0 + 1e-12:
        return SuitabilityReport(True, np.ones(m.n_assets), ratio)
    return SuitabilityReport(False, None, ratio)


@dataclass(frozen=True)
class CompatibilityReport:
    strong: bool
    weak: bool


def check_compatible(m, u: UtilityFunction) -> CompatibilityReport:
    """Strong: ``E[u(-a W)] > -inf`` for all a > 0.  Weak: for some a > 0.

    ``m`` is anything carrying a ``loss_variable`` (a finite market, the
    exponential-mixture market) or the loss variable itself.
    """
    w = getattr(m, "loss_variable", m)
    if isinstance(w, ExpTailVariable):
        a = exp_moment_abscissa(w.positive_part_tail(), u)
        if math.isnan(a):
            raise NotImplementedError("compatibility of unbounded W needs the exponential utility")
        return CompatibilityReport(strong=math.isinf(a), weak=a > 0)
    return CompatibilityReport(True, True)


# --------------------------------------------------------------------------
# martingale measures


@dataclass(frozen=True)
class Polytope:
    """``{q >= 0 : A q = b}`` with ``A = [1; dS^T]`` and ``b = (1, 0, ..., 0)``."""

    a_eq: np.ndarray
    b_eq: np.ndarray
    interior_point: np.ndarray

    @property
    def dim(self) -> int:
        return self.a_eq.shape[1] - np.linalg.matrix_rank(self.a_eq)

    def contains(self, q, tol: float = MEASURE_TOL) -> bool:
        q = np.asarray(q)
        return bool(np.all(q >= -tol) and np.allclose(self.a_eq @ q, self.b_eq, atol=tol))

    def null_space(self) -> np.ndarray:
        _, s, vt = np.linalg.svd(self.a_eq)
        rank = int((s > 1e-12 * s.max()).sum())
        return vt[rank:].T

    def vertices(self) -> np.ndarray:
        """Enumerate basic feasible solutions; fine for the small n used here."""
        n = self.a_eq.shape[1]
        # drop redundant equality rows
        rows = _independent_rows(self.a_eq)
        a, b = self.a_eq[rows], self.b_eq[rows]
        rank = len(rows)
        verts = []
        for basis in itertools.combinations(range(n), rank):
            sub = a[:, basis]
            if abs(np.linalg.det(sub)) < 1e-12:
                continue
            xb = np.linalg.solve(sub, b)
            if np.all(xb >= -1e-12):
                q = np.zeros(n)
                q[list(basis)] = np.maximum(xb, 0.0)
                if not any(np.allclose(q, v, atol=1e-12) for v in verts):
                    verts.append(q)
        return np.array(verts)

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """Random points: Dirichlet mixtures of vertices pulled toward the interior."""
        verts = self.vertices()
        w = rng.dirichlet(np.ones(len(verts)), size=k)
        t = rng.uniform(0.0, 1.0, size=(k, 1))
        return t * (w @ verts) + (1 - t) * self.interior_point

    def max_linear(self, c) -> tuple[float, np.ndarray]:
        """``max_q c . q`` over the polytope."""
        res = optimize.linprog(
            -np.asarray(c, dtype=float), A_eq=self.a_eq, b_eq=self.b_eq,
            bounds=[(0, None)] * self.a_eq.shape[1], method="highs",
        )
        if res.status != 0:
            raise RuntimeError(f"linear program over the martingale polytope failed: {res.message}")
        return -float(res.fun), res.x

    def min_linear(self, c) -> tuple[float, np.ndarray]:
        val, q = self.max_linear(-np.asarray(c, dtype=float))
        return -val, q


def _independent_rows(a) -> list:
    rows = []
    for i in range(a.shape[0]):
        cand = rows + [i]
        if np.linalg.matrix_rank(a[cand]) == len(cand):
            rows = cand
    return rows


def martingale_polytope(m: FiniteMarket) -> Polytope:
    a_eq = np.vstack([np.ones(m.n_states), m.delta_s.T])
    b_eq = np.zeros(a_eq.shape[0])
    b_eq[0] = 1.0
    return Polytope(a_eq, b_eq, m.interior_point)


def replicable(m: FiniteMarket, B, tol: float = 1e-10) -> Optional[tuple[float, np.ndarray]]:
    """``(c, h)`` with ``B = c + dS h`` if the claim is attainable, else None."""
    B = np.asarray(B, dtype=float)
    a = np.hstack([np.ones((m.n_states, 1)), m.delta_s])
    coef, *_ = np.linalg.lstsq(a, B, rcond=None)
    resid = float(np.abs(a @ coef - B).max())
    if resid > tol * max(1.0, float(np.abs(B).max())):
        return None
    return float(coef[0]), coef[1:]


def loss_multiple(m: FiniteMarket, h) -> float:
    """Smallest c >= 0 with ``dS h >= -c W`` in every state.

    Diagnostic only: on a finite one-period market every strategy meets
    the bound for some c, so it never constrains the optimisation.
    """
    gains = m.delta_s @ np.asarray(h, dtype=float)
    return float(max(0.0, (-gains / m.loss_variable).max()))


def random_market(rng: np.random.Generator, n: int, d: int, x0: float = 0.0) -> FiniteMarket:
    """A random no-arbitrage market: increments are centred under a random positive q."""
    probs = rng.dirichlet(np.ones(n))
    q = rng.dirichlet(np.ones(n) * 2.0)
    raw = rng.normal(size=(n, d))
    ds = raw - np.ones((n, 1)) * (q @ raw)
    return FiniteMarket(probs, ds, x0=x0)
