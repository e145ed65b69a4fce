"""Brute-force grid verifiers for small finite markets.

Deliberately slow and independent of the solvers: only the market and
utility types are shared.  Each grid search evaluates the objective on a
uniform grid, then repeatedly zooms into the best cell, re-centring
without zooming whenever the best point sits on the edge of the box.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .market import FiniteMarket
from .utility import UtilityFunction

__all__ = ["GridSpec", "GridResult", "grid_primal", "grid_dual", "enumerate_vertices", "vertex_sup"]


@dataclass(frozen=True)
class GridSpec:
    points: int = 41  # per dimension on every level
    zoom: float = 4.0  # each round keeps this many cells around the best point
    n_lambda: int = 161
    lambda_range: tuple = (1e-4, 1e4)

    def __post_init__(self):
        # zooming must shrink the step: the new box spans 2 * zoom old cells
        if self.points - 1 <= 2 * self.zoom or self.zoom < 1:
            raise ValueError("need points - 1 > 2 * zoom and zoom >= 1 for the grid to refine")


@dataclass(frozen=True)
class GridResult:
    value: float
    argbest: np.ndarray
    step: float  # final grid step in the search coordinates
    evaluations: int
    weak_duality_violation: float = 0.0


def _as_claim(m: FiniteMarket, B) -> np.ndarray:
    B = np.asarray(0.0 if B is None else B, dtype=float)
    return np.full(m.n_states, float(B)) if B.ndim == 0 else B


def _axes(centre, half_width, points):
    return [np.linspace(c - half_width, c + half_width, points) for c in centre]


def grid_primal(m: FiniteMarket, u: UtilityFunction, B=None, x: float = 0.0,
                spec: GridSpec = GridSpec(), target_step: float = 1e-7) -> GridResult:
    """Maximise ``E[u(x + h.dS - B)]`` over an h-grid (d <= 2)."""
    d = m.n_assets
    if d > 2:
        raise ValueError("grid_primal handles at most two assets")
    B = _as_claim(m, B)
    p, ds = m.probs, m.delta_s

    def values(hs):
        w = x + hs @ ds.T - B
        with np.errstate(over="ignore"):
            return np.asarray(u.u(w)) @ p

    if d == 0:
        return GridResult(float(values(np.zeros((1, 0)))[0]), np.zeros(0), 0.0, 1)

    # widen the box until the best point is not on its edge
    centre = np.zeros(d)
    half = 4.0
    evals = 0
    for _ in range(30):
        hs = np.array(list(itertools.product(*_axes(centre, half, spec.points))))
        v = values(hs)
        evals += len(hs)
        k = int(np.nanargmax(v))
        if np.all(np.abs(hs[k] - centre) < half * (1 - 1e-9)):
            break
        centre = hs[k]
        half *= 2.0
    best_h, best_v = hs[k], float(v[k])
    step = 2 * half / (spec.points - 1)
    half = spec.zoom * step
    for _ in range(10_000):
        if step <= target_step:
            break
        hs = np.array(list(itertools.product(*_axes(best_h, half, spec.points))))
        v = values(hs)
        evals += len(hs)
        k = int(np.nanargmax(v))
        on_edge = np.any(np.abs(hs[k] - best_h) >= half * (1 - 1e-9))
        if v[k] >= best_v:
            best_h, best_v = hs[k], float(v[k])
        if on_edge:
            # a narrow ridge can leave the box: follow it before zooming further
            continue
        step = 2 * half / (spec.points - 1)
        half = spec.zoom * step
    return GridResult(best_v, best_h, step, evals)


def _feasible_parametrisation(m: FiniteMarket):
    """``q = q_c + N t`` covering ``{A q = b}``, N with orthonormal columns."""
    a = np.vstack([np.ones(m.n_states), m.delta_s.T])
    b = np.zeros(a.shape[0])
    b[0] = 1.0
    q_c = np.linalg.lstsq(a, b, rcond=None)[0]
    _, s, vt = np.linalg.svd(a)
    rank = int((s > 1e-12 * s.max()).sum())
    return q_c, vt[rank:].T


def grid_dual(m: FiniteMarket, u: UtilityFunction, B=None, x: float = 0.0,
              spec: GridSpec = GridSpec(), primal_value: Optional[float] = None,
              target_step: float = 1e-6) -> GridResult:
    """Minimise ``lambda (x - E_Q[B]) + E[Phi(lambda q/p)]`` over a (t, log lambda) grid.

    Q ranges over the martingale polytope (dimension <= 2), parametrised by
    its affine hull; grid points with a negative coordinate are skipped.
    If ``primal_value`` is given, the largest amount by which any evaluated
    dual point falls below it is reported as the weak-duality violation.
    """
    B = _as_claim(m, B)
    p = m.probs
    q_c, N = _feasible_parametrisation(m)
    k = N.shape[1]
    if k > 2:
        raise ValueError("grid_dual handles polytopes of dimension at most two")

    def values(ts, log_lams):
        qs = q_c + ts @ N.T
        ok = np.all(qs >= -1e-15, axis=1)
        qs = np.maximum(qs[ok], 0.0)
        lam = np.exp(log_lams)[:, None, None]
        y = lam * (qs / p)[None, :, :]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            obj = lam[:, :, 0] * (x - qs @ B)[None, :] + np.asarray(u.phi(y)) @ p
        return ts[ok], obj

    lo, hi = np.log(spec.lambda_range[0]), np.log(spec.lambda_range[1])
    log_lams = np.linspace(lo, hi, spec.n_lambda)
    # the polytope sits in the simplex, so |t| <= sqrt(2)
    half_t = np.sqrt(2.0)
    ts = np.array(list(itertools.product(*_axes(np.zeros(k), half_t, spec.points)))) if k else np.zeros((1, 0))
    ts, obj = values(ts, log_lams)
    evals = obj.size
    worst = -np.inf if primal_value is None else float(primal_value - np.nanmin(obj))
    i, j = np.unravel_index(np.nanargmin(obj), obj.shape)
    best_v = float(obj[i, j])
    best_t, best_l = ts[j], log_lams[i]
    step_t = 2 * half_t / (spec.points - 1) if k else 0.0
    step_l = (hi - lo) / (spec.n_lambda - 1)
    half_t, half_l = spec.zoom * step_t, spec.zoom * step_l
    for _ in range(10_000):
        if max(step_t, step_l) <= target_step:
            break
        grid_t = np.array(list(itertools.product(*_axes(best_t, half_t, spec.points)))) if k else np.zeros((1, 0))
        grid_l = np.linspace(best_l - half_l, best_l + half_l, spec.points)
        grid_t, obj = values(grid_t, grid_l)
        evals += obj.size
        on_edge = False
        if obj.size:
            if primal_value is not None:
                worst = max(worst, float(primal_value - np.nanmin(obj)))
            i, j = np.unravel_index(np.nanargmin(obj), obj.shape)
            on_edge = abs(grid_l[i] - best_l) >= half_l * (1 - 1e-9) or (
                k > 0 and np.any(np.abs(grid_t[j] - best_t) >= half_t * (1 - 1e-9)))
            if obj[i, j] <= best_v:
                best_v, best_t, best_l = float(obj[i, j]), grid_t[j], grid_l[i]
        if on_edge:
            continue
        step_t = 2 * half_t / (spec.points - 1) if k else 0.0
        step_l = 2 * half_l / (spec.points - 1)
        half_t, half_l = spec.zoom * step_t, spec.zoom * step_l
    q = q_c + N @ best_t
    return GridResult(best_v, np.r_[np.exp(best_l), q], max(step_t, step_l), evals, max(worst, 0.0))


def enumerate_vertices(m: FiniteMarket) -> np.ndarray:
    """Vertices of the martingale polytope by trying every support of size rank(A)."""
    a = np.vstack([np.ones(m.n_states), m.delta_s.T])
    b = np.zeros(a.shape[0])
    b[0] = 1.0
    n = m.n_states
    out = []
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            sub = a[:, support]
            sol, *_ = np.linalg.lstsq(sub, b, rcond=None)
            if np.linalg.matrix_rank(sub) < size or np.abs(sub @ sol - b).max() > 1e-10:
                continue
            if np.all(sol >= -1e-12):
                q = np.zeros(n)
                q[list(support)] = np.maximum(sol, 0.0)
                if not any(np.allclose(q, v, atol=1e-10) for v in out):
                    out.append(q)
    return np.array(out)


def vertex_sup(m: FiniteMarket, B) -> float:
    """``sup_Q E_Q[B]`` as the best vertex."""
    return float((enumerate_vertices(m) @ _as_claim(m, B)).max())
