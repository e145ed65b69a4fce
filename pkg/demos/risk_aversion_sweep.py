"""Price of a non-replicable claim as risk aversion grows, and its volume asymptotics.

Run: python demos/risk_aversion_sweep.py
"""
import numpy as np

from orlicz_indiff import FiniteMarket, exponential_utility, price, price_bounds, volume_asymptotics

m = FiniteMarket([0.5, 0.2, 0.3], [[1.0], [0.0], [-1.0]])
B = np.array([1.0, 0.0, 0.0])
bounds = price_bounds(m, exponential_utility(1.0), B)
print(f"zero-penalty price {bounds.lower:.6f}, superhedging price {bounds.upper:.6f}")
for gamma in (0.25, 0.5, 1, 2, 4, 8, 16, 32):
    print(f"  gamma = {gamma:>5}: pi = {price(m, exponential_utility(gamma), B, 0.0):.6f}")

va = volume_asymptotics(m, exponential_utility(1.0), B, 0.0)
print(f"\npi(bB)/b -> {va.slope0:.8f} as b -> 0 (target {va.zero_penalty_value:.8f})")
print(f"pi(bB)/b -> {va.slope_inf:.8f} as b -> inf (target {va.lp_value:.8f})")
