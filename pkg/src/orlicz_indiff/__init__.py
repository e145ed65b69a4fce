"""Expected-utility duality and indifference pricing with Orlicz-space tools.

Finite one-period markets are solved exactly (primal Newton, dual
alternating minimisation, grid oracles); the exponential-mixture family
gives semi-analytic examples whose dual optimiser has a singular part.
"""
from .dual import DualSolution, minimal_entropy_measure, minimize_dual
from .exp_mixture import (
    BoundedAlphaClaim,
    DeltaYClaim,
    ExpMixtureMarket,
    MonotonicityError,
    ZeroClaim,
    dual_regular_density,
    hedging_delta,
    optimal_h,
    singular_bounds,
    singular_mass,
)
from .indifference import (
    PriceReport,
    dual_price_representation,
    penalty,
    price,
    price_bounds,
    price_exponential,
    price_report,
    risk_measure_axioms,
    volume_asymptotics,
)
from .market import (
    ArbitrageError,
    FiniteMarket,
    MarketValidationError,
    MartingaleMeasure,
    ProbabilityNormalizationError,
    check_compatible,
    check_suitable,
    martingale_polytope,
    random_market,
    replicable,
)
from .primal import ConvergenceError, PrimalSolution, maximize
from .utility import (
    DiscreteDistribution,
    ExpTailVariable,
    UtilityFunction,
    claim_admissible,
    conjugate,
    custom_utility,
    exponential_utility,
    luxemburg_norm,
    orlicz_dual_norm,
    young_pair,
)

__version__ = "0.1.0"
