"""Quantile-of-estimators robustification, geometric quantiles and their limit theory."""

from .asymptotics import (
    ConcentrationParams,
    LimitLaw,
    bivariate_normal_upper,
    brownian_qoe_cov,
    c_nu,
    concentration_bound,
    gaussian_orthant,
    ols_gamma,
    psi,
    sigma_alpha,
)
from .geometry import (
    GeoQuantileResult,
    GeoStatus,
    LineFit,
    NonConvergenceError,
    SolverOptions,
    adjusted_parameter,
    collinearity_test,
    first_order_residual,
    geometric_quantile,
    l1_geometric_quantile,
    uniqueness_predicate,
)
from .qoe import (
    OLS,
    Amplitude,
    BlockPartition,
    ComponentWise,
    ContaminationSpec,
    Dependent,
    FixedValue,
    Geometric,
    Mean,
    Placement,
    QoEConfig,
    QoEResult,
    SampleQuantile,
    Variance,
    admissible_beta,
    block_count,
    block_estimates,
    contaminate,
    partition,
    qoe_estimate,
    raw_estimate,
)
from .quantiles import (
    componentwise_quantile,
    pointwise_path_quantile,
    univariate_quantile,
    univariate_quantile_lower,
)

__version__ = "0.1.0"

__all__ = [
    "Amplitude",
    "BlockPartition",
    "ComponentWise",
    "ConcentrationParams",
    "ContaminationSpec",
    "Dependent",
    "FixedValue",
    "GeoQuantileResult",
    "GeoStatus",
    "Geometric",
    "LimitLaw",
    "LineFit",
    "Mean",
    "NonConvergenceError",
    "OLS",
    "Placement",
    "QoEConfig",
    "QoEResult",
    "SampleQuantile",
    "SolverOptions",
    "Variance",
    "adjusted_parameter",
    "admissible_beta",
    "bivariate_normal_upper",
    "block_count",
    "block_estimates",
    "brownian_qoe_cov",
    "c_nu",
    "collinearity_test",
    "componentwise_quantile",
    "concentration_bound",
    "contaminate",
    "first_order_residual",
    "gaussian_orthant",
    "geometric_quantile",
    "l1_geometric_quantile",
    "ols_gamma",
    "partition",
    "pointwise_path_quantile",
    "psi",
    "qoe_estimate",
    "raw_estimate",
    "sigma_alpha",
    "uniqueness_predicate",
    "univariate_quantile",
    "univariate_quantile_lower",
]
