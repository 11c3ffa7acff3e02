"""Down-and-out call pricing under the 2-hypergeometric stochastic volatility model.

First-order small vol-of-vol expansion with closed-form building blocks,
single- and two-stage barrier families, and a seeded Monte Carlo benchmark
engine with Brownian-bridge barrier monitoring.
"""

from .analytic import (
    JointLawParams,
    MixedDerivCoeffs,
    binorm_cdf,
    joint_law_density,
    mixed_dxdv,
    mixed_dxdv_coeffs,
    norm_cdf,
    norm_pdf,
    psi,
    survival_probability,
    upsilon,
)
from .model import (
    BarrierSpec,
    MarketState,
    ModelParams,
    OptionSpec,
    VolSensitivities,
    barrier_level,
    choose_beta,
    choose_multistage_betas,
    integrated_variance,
    matched_single_stage,
    noiseless_logvol,
    vol_sensitivities,
)
from .montecarlo import (
    McConfig,
    McEstimate,
    bridge_crossing_prob,
    mc_doc_price,
    mc_time_dependent_doc_price,
    simulate_paths,
)
from .pricing import (
    PriceBreakdown,
    QuadratureConfig,
    approx_price,
    bs_barrier_price,
    first_order_term,
    two_stage_first_order,
    two_stage_zero_order,
    zero_order_price,
)
from .quadrature import QuadratureError, adaptive_quad

__all__ = [
    "BarrierSpec",
    "JointLawParams",
    "MarketState",
    "McConfig",
    "McEstimate",
    "MixedDerivCoeffs",
    "ModelParams",
    "OptionSpec",
    "PriceBreakdown",
    "QuadratureConfig",
    "QuadratureError",
    "VolSensitivities",
    "adaptive_quad",
    "approx_price",
    "barrier_level",
    "binorm_cdf",
    "bridge_crossing_prob",
    "bs_barrier_price",
    "choose_beta",
    "choose_multistage_betas",
    "first_order_term",
    "integrated_variance",
    "joint_law_density",
    "matched_single_stage",
    "mc_doc_price",
    "mc_time_dependent_doc_price",
    "mixed_dxdv",
    "mixed_dxdv_coeffs",
    "noiseless_logvol",
    "norm_cdf",
    "norm_pdf",
    "psi",
    "simulate_paths",
    "survival_probability",
    "two_stage_first_order",
    "two_stage_zero_order",
    "upsilon",
    "vol_sensitivities",
    "zero_order_price",
]

__version__ = "0.1.0"
