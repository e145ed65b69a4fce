"""The exponential-mixture market S1 = Y Z: optimal positions and singular dual mass.

Run: python demos/exp_mixture_examples.py
"""
from orlicz_indiff import (
    BoundedAlphaClaim,
    DeltaYClaim,
    ExpMixtureMarket,
    dual_regular_density,
    hedging_delta,
    optimal_h,
    singular_bounds,
    singular_mass,
)
from orlicz_indiff import exp_mixture as em

base = ExpMixtureMarket.default()
print(f"{base.z.size} atoms, P(Z = 1) = {base.p[0]}")

for delta in (0.1, 0.3, 0.6):
    m = base.with_claim(DeltaYClaim(delta))
    opt = optimal_h(m)
    dens = dual_regular_density(m)
    print(f"\nB = {delta} Y")
    print(f"  h* = {opt.h_star:.6g} (right end of the interval: {opt.attained_at_boundary})")
    print(f"  regular density normaliser {dens.normalizer:.10f}, entropy {dens.relative_entropy():.6f}")
    print(f"  singular mass {singular_mass(m):.12f} (quadrature {singular_mass(m, 'quadrature'):.12f})")
    print(f"  extra shares held because of the claim {hedging_delta(m, base):+.6f}")
    print(f"  Cov(B, S1) = {em.claim_stock_covariance(m):+.6f}")
    sb = singular_bounds(m)
    print(f"  L = {sb.L:.6g}, singular action on -B in [{sb.lower:.6g}, {sb.upper:.6g}]")

m = base.with_claim(BoundedAlphaClaim(lambda y, z: 0.2 * (y * z > 1), 0.2))
print("\nbounded claim 0.2 * 1{YZ > 1}")
print(f"  h* = {optimal_h(m).h_star}, hedge {hedging_delta(m, base):+.1e}, "
      f"singular action zero: {singular_bounds(m).claim_action_zero}")
