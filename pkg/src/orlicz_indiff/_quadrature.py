"""Vectorised adaptive Gauss-Kronrod (G7/K15) on a set of panels."""
from __future__ import annotations

import numpy as np

# QUADPACK 15-point Kronrod abscissae (positive half) and weights, with the
# embedded 7-point Gauss weights at the odd-indexed abscissae.
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
W_KRONROD = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
W_GAUSS = np.zeros(15)
W_GAUSS[[1, 3, 5, 9, 11, 13]] = np.concatenate([_WG[:3], _WG[2::-1]])
W_GAUSS[7] = _WG[3]


def gauss_kronrod(f, edges, epsabs: float = 0.0, epsrel: float = 1e-13, max_rounds: int = 60):
    """Integrate a vectorised ``f`` over ``[edges[0], edges[-1]]``.

    Each panel is bisected until its Kronrod/Gauss discrepancy falls under
    its length-proportional share of the tolerance.  Returns ``(value, err)``.
    """
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    total_len = edges[-1] - edges[0]
    value = 0.0
    err = 0.0
    for _ in range(max_rounds):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        pts = mid[:, None] + half[:, None] * NODES[None, :]
        vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
        k = half * (vals @ W_KRONROD)
        g = half * (vals @ W_GAUSS)
        e = np.abs(k - g)
        running = value + float(k.sum())
        tol = max(epsabs, epsrel * abs(running))
        share = tol * (hi - lo) / total_len
        done = (e <= share) | (half < 1e-14 * np.maximum(1.0, np.abs(mid)))
        value += float(k[done].sum())
        err += float(e[done].sum())
        if done.all():
            return value, err
        lo, hi = lo[~done], hi[~done]
        mid = mid[~done]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    # out of rounds: take the last Kronrod estimates as they are
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * NODES[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    k = half * (vals @ W_KRONROD)
    return value + float(k.sum()), err + float(np.abs(k - half * (vals @ W_GAUSS)).sum())
