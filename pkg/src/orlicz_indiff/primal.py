"""Expected-utility maximisation over one-period trading strategies."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .market import FiniteMarket, loss_multiple
from .utility import UtilityFunction

__all__ = ["PrimalSolution", "ConvergenceError", "maximize", "exponential_log_value"]

GRAD_TOL = 1e-10
MAX_ITER = 500
ARMIJO_C = 1e-4
NOISE = 16 * np.finfo(float).eps


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PrimalSolution:
    h_star: np.ndarray
    value: float
    f_B: np.ndarray
    gradient_residual: float
    iterations: int
    unique: bool = True
    log_value: Optional[float] = None  # log(-value), exponential utility only
    loss_multiple: float = 0.0  # smallest c with dS h >= -c W


def logsumexp(z, b=None) -> float:
    """``log sum b exp(z)`` for positive weights; scipy's version is slow on tiny arrays."""
    top = float(np.max(z))
    if not math.isfinite(top):
        return top
    e = np.exp(z - top)
    return top + math.log(float(e @ b) if b is not None else float(e.sum()))


def _claim_vector(m: FiniteMarket, B) -> np.ndarray:
    if B is None:
        B = m.claim if m.claim is not None else 0.0
    B = np.asarray(B, dtype=float)
    if B.ndim == 0:
        B = np.full(m.n_states, float(B))
    if B.shape != (m.n_states,):
        raise ValueError(f"no-claim-evaluation: claim has {B.size} entries, market has {m.n_states} states")
    return B


def _active_columns(ds: np.ndarray) -> np.ndarray:
    keep = np.abs(ds).max(axis=0) > 0 if ds.shape[1] else np.zeros(0, dtype=bool)
    if ds.shape[1] and not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} asset(s) with identically zero increments", stacklevel=3)
    return keep


def _newton_step(hess, g):
    """``-hess^+ g``; a direct solve when the Hessian is well conditioned."""
    if hess.shape == (1, 1):
        hv = float(hess[0, 0])
        return np.array([-g[0] / hv]) if abs(hv) > 1e-300 else np.zeros(1)
    try:
        if np.linalg.cond(hess) < 1e12:
            return -np.linalg.solve(hess, g)
    except np.linalg.LinAlgError:
        pass
    return -np.linalg.pinv(hess, rcond=1e-13) @ g


def _newton(fun, grad_hess, h0, residual, maximize_=True):
    """Damped Newton with Armijo backtracking.  ``fun`` is maximised if ``maximize_``."""
    sign = 1.0 if maximize_ else -1.0
    h = h0.copy()
    f = fun(h)
    for it in range(MAX_ITER):
        g, hess = grad_hess(h)
        if residual(h) <= GRAD_TOL:
            return h, it
        step = _newton_step(hess, g)
        slope = sign * float(g @ step)
        fallback = slope <= 0 or not np.any(step)
        if fallback:
            # degenerate Hessian (e.g. underflowed weights): gradient direction
            step = sign * g
            slope = sign * float(g @ step)
        t = 1.0
        if fallback:
            # the curvature is unknown here, so let the step grow while it keeps improving
            f_t = fun(h + step)
            while t < 1e12:
                f_next = fun(h + 2 * t * step)
                if not sign * (f_next - f_t) > 0:
                    break
                t, f_t = 2 * t, f_next
        res_h = None
        while True:
            cand = h + t * step
            fc = fun(cand)
            if sign * (fc - f) >= ARMIJO_C * t * slope or t < 1e-16:
                break
            if t == 1.0 and not fallback and abs(fc - f) <= NOISE * max(1.0, abs(f)):
                # near the optimum the decrease is below rounding: judge the full
                # Newton step by the gradient residual instead
                res_h = residual(h) if res_h is None else res_h
                if residual(cand) < res_h:
                    break
            t *= 0.5
        if t < 1e-16 and not fallback:
            # Newton direction is useless at machine precision; try the gradient once
            step = sign * g
            t = 1.0
            while t > 1e-16:
                cand = h + t * step
                fc = fun(cand)
                if sign * (fc - f) > 0:
                    break
                t *= 0.5
        if t < 1e-16:
            # line search stalled at machine precision
            return h, it
        h, f = cand, fc
    return h, MAX_ITER


def exponential_log_value(ds: np.ndarray, probs: np.ndarray, gamma: float, B: np.ndarray, x: float = 0.0):
    """Minimise ``log E[exp(-gamma (x + dS h - B))]`` over h.

    Returns ``(h, log_value, residual, iterations)``; the utility value is
    ``-exp(log_value)``.  Working in log space keeps very large claims finite.
    """
    logp = np.log(probs)

    def z_of(h):
        return -gamma * (x + ds @ h - B)

    def fun(h):
        return float(logsumexp(z_of(h), b=probs))

    def weights(h):
        z = z_of(h) + logp
        return np.exp(z - logsumexp(z))

    def grad_hess(h):
        w = weights(h)
        mean = ds.T @ w
        cov = (ds * w[:, None]).T @ ds - np.outer(mean, mean)
        return -gamma * mean, gamma * gamma * cov

    def residual(h):
        return float(np.abs(ds.T @ weights(h)).max()) if ds.shape[1] else 0.0

    h0 = np.zeros(ds.shape[1])
    h, it = _newton(fun, grad_hess, h0, residual, maximize_=False)
    if residual(h) > GRAD_TOL:
        # large claims make the weights degenerate along the way; restart from
        # the minimiser of max_i (z_i + log p_i), which log-sum-exp approaches
        h, it2 = _newton(fun, grad_hess, _minimax_start(ds, logp, gamma, B, x), residual, maximize_=False)
        it += it2
    return h, fun(h), residual(h), it


def _minimax_start(ds, logp, gamma, B, x):
    n, d = ds.shape
    # minimise t subject to -gamma (x + ds h - B) + log p <= t
    c = np.zeros(d + 1)
    c[-1] = 1.0
    a_ub = np.hstack([-gamma * ds, -np.ones((n, 1))])
    b_ub = -logp - gamma * (B - x)
    res = optimize.linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * (d + 1), method="highs")
    return res.x[:d] if res.status == 0 else np.zeros(d)


def maximize(m: FiniteMarket, u: UtilityFunction, B=None, x: Optional[float] = None) -> PrimalSolution:
    """``sup_h E[u(x + dS h - B)]`` by damped Newton from h = 0.

    ``gradient_residual`` is the sup-norm of ``E[u'(.) dS] / E[u'(.)]``, the
    expected increment under the marginal-utility-weighted measure, which is
    zero exactly at the optimum and does not depend on the utility's scale.
    """
    B = _claim_vector(m, B)
    x = m.x0 if x is None else float(x)
    keep = _active_columns(m.delta_s)
    ds = m.delta_s[:, keep]
    p = m.probs
    h_full = np.zeros(m.n_assets)

    if u.kind == "exponential":
        h, logv, resid, it = exponential_log_value(ds, p, u.gamma, B, x)
        h_full[keep] = h
        f = x + ds @ h
        return PrimalSolution(h_full, -math.exp(logv), f, resid, it, _unique(ds), logv,
                              loss_multiple(m, h_full))

    def fun(h):
        val = float(p @ u.u(x + ds @ h - B))
        return val if math.isfinite(val) else -math.inf

    def grad_hess(h):
        w = x + ds @ h - B
        up = p * u.u_prime(w)
        upp = p * u.u_second(w)
        return ds.T @ up, (ds * upp[:, None]).T @ ds

    def residual(h):
        if not ds.shape[1]:
            return 0.0
        up = p * u.u_prime(x + ds @ h - B)
        total = up.sum()
        return float(np.abs(ds.T @ up).max() / total) if math.isfinite(total) and total > 0 else math.inf

    with np.errstate(over="ignore", invalid="ignore"):
        if not math.isfinite(fun(np.zeros(ds.shape[1]))):
            raise ConvergenceError("overflow: utility is not finite at the starting strategy")
        h, it = _newton(fun, grad_hess, np.zeros(ds.shape[1]), residual)
        val = fun(h)
    if not math.isfinite(val):
        raise ConvergenceError("unbounded: primal value is not finite")
    h_full[keep] = h
    unique = _unique(ds) and u.strictly_concave
    return PrimalSolution(h_full, val, x + ds @ h, residual(h), it, unique,
                          loss_multiple=loss_multiple(m, h_full))


def _unique(ds) -> bool:
    return ds.shape[1] == 0 or np.linalg.matrix_rank(ds) == ds.shape[1]
