"""Weak GARCH(1,1): temporal aggregation, diffusion limit and option smiles."""

__version__ = "0.1.0"

from .aggregation import AggregationResult, aggregate, c_factor, disaggregate
from .limit import (
    continuous_to_discrete,
    convergence_table,
    discrete_to_continuous,
    kappa_limit,
)
from .params import (
    ContinuousParams,
    DiscreteGarchParams,
    KurtosisSpec,
    validate_continuous,
    validate_discrete,
)
from .pricing import OptionSpec, SmileResult, bs_price, implied_vol, mc_price, smile
from .simulate import (
    PathSet,
    Scheme,
    SimConfig,
    blp_orthogonality_check,
    kurtotic_transform,
    sample_kurtosis,
    simulate,
)

__all__ = [
    "AggregationResult",
    "ContinuousParams",
    "DiscreteGarchParams",
    "KurtosisSpec",
    "OptionSpec",
    "PathSet",
    "Scheme",
    "SimConfig",
    "SmileResult",
    "aggregate",
    "blp_orthogonality_check",
    "bs_price",
    "c_factor",
    "continuous_to_discrete",
    "convergence_table",
    "disaggregate",
    "discrete_to_continuous",
    "implied_vol",
    "kappa_limit",
    "kurtotic_transform",
    "mc_price",
    "sample_kurtosis",
    "simulate",
    "smile",
    "validate_continuous",
    "validate_discrete",
]
