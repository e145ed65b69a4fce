"""Primal and dual problems on a three-state market, then the indifference price.

Run: python demos/finite_market_duality.py
"""
import numpy as np

from orlicz_indiff import (
    FiniteMarket,
    dual_price_representation,
    exponential_utility,
    martingale_polytope,
    maximize,
    minimize_dual,
    penalty,
    price,
    price_bounds,
    price_exponential,
)

m = FiniteMarket([0.5, 0.2, 0.3], [[1.0], [0.0], [-1.0]])
u = exponential_utility(1.0)
B = np.array([1.0, 0.0, 0.0])

primal = maximize(m, u, B, 0.0)
dual = minimize_dual(m, u, B, 0.0)
print(f"primal value {primal.value:.12f} at h* = {primal.h_star}")
print(f"dual value   {dual.value:.12f} at lambda* = {dual.lambda_star:.6f}, Q* = {dual.q_star.q}")
print(f"gap {dual.duality_gap:.1e}, residuals {dual.foc_lambda_residual:.1e} / {dual.foc_q_residual:.1e}")

poly = martingale_polytope(m)
print("\nmartingale measures are (t, 1 - 2t, t); vertices:")
print(poly.vertices())

pi = price(m, u, B, 0.0)
rep = dual_price_representation(m, u, B, 0.0)
bounds = price_bounds(m, u, B, 0.0)
print(f"\nindifference price       {pi:.12f}")
print(f"closed form (entropy)    {price_exponential(m, 1.0, B):.12f}")
print(f"max_Q E_Q[B] - alpha(Q)  {rep.price:.12f} attained at {rep.maximizers[0].q}")
print(f"bounds [{bounds.lower:.6f}, {bounds.upper:.6f}]")

print("\npenalty along the polytope:")
for t in (0.05, 0.15, 0.25, 0.35, 0.45):
    q = np.array([t, 1 - 2 * t, t])
    print(f"  t = {t:.2f}  alpha = {penalty(m, u, q, 0.0):.6f}")
