"""Dual problem over (lambda, Q) on finite markets.

The dual objective is ``lambda (x - E_Q[B]) + E[Phi(lambda dQ/dP)]`` over
lambda > 0 and martingale measures Q.  On a finite space every functional
is a measure, so there is no singular part to carry around.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .market import FiniteMarket, MartingaleMeasure, Polytope, martingale_polytope
from .primal import ConvergenceError, _claim_vector, maximize
from .utility import UtilityFunction, exponential_utility

__all__ = [
    "DualSolution",
    "LambdaBracketError",
    "lambda_foc",
    "lambda_foc_residual",
    "q_variational_residual",
    "minimize_dual",
    "minimal_entropy_measure",
    "relative_entropy",
    "exponential_dual_value",
    "duality_gap",
    "dual_objective",
    "projected_newton",
    "PolytopeFace",
]

FOC_TOL = 1e-9
LAMBDA_BRACKET = (1e-12, 1e12)
Q_FLOOR = 1e-14
MAX_OUTER = 200
MAX_Q_ITER = 300


class LambdaBracketError(ConvergenceError):
    """The scalar first-order condition in lambda has no root in the search bracket."""


@dataclass(frozen=True)
class DualSolution:
    lambda_star: float
    q_star: MartingaleMeasure
    value: float
    foc_lambda_residual: float
    foc_q_residual: float
    f_B_recovered: np.ndarray
    duality_gap: float
    iterations: int


def relative_entropy(q, p) -> float:
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    pos = q > 0
    return float(np.sum(q[pos] * np.log(q[pos] / p[pos])))


def dual_objective(u: UtilityFunction, lam: float, q, p, B, x: float) -> float:
    q = np.asarray(q, dtype=float)
    return float(lam * (x - q @ B) + p @ u.phi(lam * q / p))


def _foc_terms(u, lam, dens, p):
    pos = dens > 0
    y = lam * dens[pos]
    val = float(np.dot(p[pos] * dens[pos], u.phi_prime(y)))
    deriv = float(np.dot(p[pos] * dens[pos] ** 2, u.phi_second(y)))
    return val, deriv


def lambda_foc_residual(u: UtilityFunction, lam: float, q_density, p, c: float) -> float:
    val, _ = _foc_terms(u, lam, np.asarray(q_density, float), np.asarray(p, float))
    return abs(val + c)


def lambda_foc(u: UtilityFunction, q_density, p, c: float) -> float:
    """Unique ``lambda > 0`` with ``E[(dQ/dP) Phi'(lambda dQ/dP)] + c = 0``.

    Safeguarded Newton in ``log lambda``: the left side is increasing, so a
    bisection step is taken whenever Newton leaves the current bracket.
    """
    dens = np.asarray(q_density, dtype=float)
    p = np.asarray(p, dtype=float)

    def G(s):
        val, deriv = _foc_terms(u, math.exp(s), dens, p)
        return val + c, math.exp(s) * deriv

    lo, hi = math.log(LAMBDA_BRACKET[0]), math.log(LAMBDA_BRACKET[1])
    g_lo, _ = G(lo)
    g_hi, _ = G(hi)
    if not (g_lo <= 0 <= g_hi):
        raise LambdaBracketError(
            f"lambda-bracket-failure: first-order condition has no root in {LAMBDA_BRACKET}"
        )
    s = 0.0 if lo < 0 < hi else 0.5 * (lo + hi)
    for _ in range(400):
        g, dg = G(s)
        if g == 0:
            return math.exp(s)
        if g < 0:
            lo = s
        else:
            hi = s
        step_ok = dg > 0 and math.isfinite(dg)
        s_new = s - g / dg if step_ok else 0.5 * (lo + hi)
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= 1e-15 * max(1.0, abs(s)):
            return math.exp(s_new)
        s = s_new
    return math.exp(s)


# --------------------------------------------------------------------------
# Q step


class PolytopeFace:
    """Linear minimisation over the polytope, by vertices when they are few."""

    def __init__(self, poly: Polytope):
        self.poly = poly
        self.verts = poly.vertices() if poly.a_eq.shape[1] <= 10 else None

    def min_linear(self, g) -> float:
        if self.verts is not None and len(self.verts):
            return float((self.verts @ g).min())
        return self.poly.min_linear(g)[0]


def _vi_residual(g, q, face: PolytopeFace) -> float:
    return max(0.0, float(g @ q) - face.min_linear(g))


def q_variational_residual(u: UtilityFunction, lam: float, q, p, B, poly: Polytope) -> float:
    """``E_{Q*}[Phi'(lam dQ*/dP) - B] - min_Q E_Q[Phi'(lam dQ*/dP) - B]`` (>= 0).

    Zero exactly when Q* satisfies the variational inequality of the
    lambda-fixed dual problem.
    """
    q = np.asarray(q, dtype=float)
    g = _q_gradient(u, lam, q, p, B)
    return _vi_residual(g, q, PolytopeFace(poly))


def _q_gradient(u, lam, q, p, B):
    with np.errstate(divide="ignore"):
        g = np.asarray(u.phi_prime(lam * np.maximum(q, Q_FLOOR) / p), dtype=float) - B
    return g


def projected_newton(J, grad, hess_diag, q, poly: Polytope, face: PolytopeFace, tol: float,
                     max_iter: int = MAX_Q_ITER):
    """Minimise a separable-curvature convex ``J`` over the martingale polytope.

    Newton steps are restricted to the affine hull (KKT solve with the
    diagonal curvature) and shortened to keep the iterate strictly positive.
    Stops when the variational-inequality residual drops below ``tol``.
    """
    a = poly.a_eq
    q = np.maximum(q, Q_FLOOR)
    q = q / q.sum()
    fq = J(q)
    for _ in range(max_iter):
        g = grad(q)
        if _vi_residual(g, q, face) <= tol:
            break
        hdiag = np.asarray(hess_diag(q), dtype=float)
        hinv = 1.0 / np.where(np.isfinite(hdiag) & (hdiag > 0), hdiag, 1e300)
        m = (a * hinv) @ a.T
        nu, *_ = np.linalg.lstsq(m, -(a * hinv) @ g, rcond=None)
        r = g + a.T @ nu
        dq = -hinv * r
        # dq' H dq; equals -g.dq in exact arithmetic but never goes negative
        decrement = float(r @ (hinv * r))
        if not decrement > 1e-30:
            break
        neg = dq < 0
        t = 1.0
        if np.any(neg):
            t = min(1.0, 0.995 * float(np.min(-(q[neg] - Q_FLOOR) / dq[neg])))
        if decrement < 1e-12 and t == 1.0:
            # inside the quadratic region the decrease is below rounding of J
            cand = q + dq
        else:
            while t > 1e-16:
                cand = q + t * dq
                fc = J(cand)
                if fc <= fq - 1e-4 * t * decrement:
                    break
                t *= 0.5
            if t <= 1e-16:
                break
        cand = np.maximum(cand, Q_FLOOR)
        q, fq = cand, J(cand)
    return q


def _q_step(u, lam, q, p, B, poly: Polytope, face: PolytopeFace, tol: float):
    """Minimise ``sum (p/lam) Phi(lam q/p) - q.B`` over the polytope for fixed lambda."""
    return projected_newton(
        lambda qq: float(np.dot(p / lam, u.phi(lam * qq / p)) - qq @ B),
        lambda qq: _q_gradient(u, lam, qq, p, B),
        lambda qq: lam * u.phi_second(lam * qq / p) / p,
        q, poly, face, tol,
    )


def _min_norm_on_face(g, q, poly: Polytope, face: PolytopeFace, tol: float):
    """Among near-optimal measures (same linearised cost) pick the one of least norm."""
    target = float(g @ q)
    cons = [
        {"type": "eq", "fun": lambda z: poly.a_eq @ z - poly.b_eq},
        {"type": "ineq", "fun": lambda z: target + tol - g @ z},
    ]
    res = optimize.minimize(
        lambda z: float(z @ z), q, jac=lambda z: 2 * z, method="SLSQP",
        bounds=[(0, None)] * q.size, constraints=cons, options={"ftol": 1e-15, "maxiter": 500},
    )
    return res.x if res.success else q


def minimize_dual(
    m: FiniteMarket,
    u: UtilityFunction,
    B=None,
    x: Optional[float] = None,
    tol: float = FOC_TOL,
    compute_gap: bool = True,
) -> DualSolution:
    """Alternate the exact lambda update with projected-Newton Q updates.

    Stops when both first-order residuals are below ``tol``.
    """
    B = _claim_vector(m, B)
    x = m.x0 if x is None else float(x)
    p = m.probs
    poly = martingale_polytope(m)
    face = PolytopeFace(poly)
    q = poly.interior_point
    lam = 1.0
    lam_res = q_res = math.inf
    it = 0
    for it in range(1, MAX_OUTER + 1):
        lam = lambda_foc(u, q / p, p, x - q @ B)
        q = _q_step(u, lam, q, p, B, poly, face, 0.1 * tol)
        lam_res = lambda_foc_residual(u, lam, q / p, p, x - q @ B)
        if lam_res > tol:
            lam = lambda_foc(u, q / p, p, x - q @ B)
            lam_res = lambda_foc_residual(u, lam, q / p, p, x - q @ B)
        q_res = _vi_residual(_q_gradient(u, lam, q, p, B), q, face)
        if lam_res <= tol and q_res <= tol:
            break
    else:
        raise ConvergenceError(
            f"dual did not converge: lambda residual {lam_res:.2e}, Q residual {q_res:.2e}"
        )
    if not u.strictly_concave:
        q = _min_norm_on_face(_q_gradient(u, lam, q, p, B), q, poly, face, 1e-10)
    value = dual_objective(u, lam, q, p, B, x)
    with np.errstate(divide="ignore"):
        f_rec = -np.asarray(u.phi_prime(lam * q / p), dtype=float) + B
    gap = math.nan
    if compute_gap:
        gap = abs(maximize(m, u, B, x).value - value)
    return DualSolution(lam, MartingaleMeasure(q), value, lam_res, q_res, f_rec, gap, it)


def duality_gap(m: FiniteMarket, u: UtilityFunction, B=None, x: Optional[float] = None) -> float:
    primal = maximize(m, u, B, x)
    dual = minimize_dual(m, u, B, x, compute_gap=False)
    return abs(primal.value - dual.value)


# --------------------------------------------------------------------------
# exponential specialisation


def minimal_entropy_measure(m: FiniteMarket, gamma: float = 1.0) -> MartingaleMeasure:
    """``argmin H(Q|P)`` over martingale measures.

    Built from the B = 0 primal optimiser: ``dQ/dP`` is proportional to
    ``exp(-gamma h* dS)``.
    """
    sol = maximize(m, exponential_utility(gamma), 0.0, 0.0)
    z = -gamma * (m.delta_s @ sol.h_star)
    w = m.probs * np.exp(z - z.max())
    q = w / w.sum()
    g = np.log(q / m.probs)
    resid = _vi_residual(g, q, PolytopeFace(martingale_polytope(m)))
    if resid > FOC_TOL:
        raise ConvergenceError(f"minimal entropy measure residual {resid:.2e}")
    return MartingaleMeasure(q)


def exponential_dual_value(m: FiniteMarket, gamma: float, B, x: float, q) -> float:
    """``-exp(-(H(Q|P) + gamma (x - E_Q[B])))`` evaluated at a given Q."""
    q = np.asarray(q, dtype=float)
    B = _claim_vector(m, B)
    return -math.exp(-(relative_entropy(q, m.probs) + gamma * (x - q @ B)))
