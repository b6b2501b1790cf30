"""Estimator exports."""

from .base import EstimationError, GridFunction2D, Observation, Sample, Zeta
from .bounds import (
    ConditionalPartialCdf,
    VarianceMoments,
    estimate_partial_cdfs,
    estimate_ucvate,
    estimate_variance_moments,
    frechet_bounds,
    makarov_bounds_avg,
    makarov_bounds_curve,
    makarov_bounds_uncond,
    variance_bound_check,
    variance_bounds,
    variance_decomposition,
)
from .deconv import estimate_f_delta, estimate_f_delta_curve, estimate_ucdite, oracle_deconv, prob_positive_effect
from .estimators import (
    RadonPipeline,
    direct_estimate,
    estimate_ate,
    estimate_density,
    estimate_marginal_cdf,
    estimate_partial_ft,
    estimate_tt,
    estimate_tut,
    estimate_ucate,
    pipeline_estimate,
    qte,
)
from .radon import HemispherePoint, HplaneFunction, QuadratureGrid, RadonInverse, apply_AT, apply_BT
from .regression import density_sv, local_poly_regress

__all__ = [
    "ConditionalPartialCdf",
    "EstimationError",
    "GridFunction2D",
    "HemispherePoint",
    "HplaneFunction",
    "Observation",
    "QuadratureGrid",
    "RadonInverse",
    "RadonPipeline",
    "Sample",
    "VarianceMoments",
    "Zeta",
    "apply_AT",
    "apply_BT",
    "density_sv",
    "direct_estimate",
    "estimate_ate",
    "estimate_density",
    "estimate_f_delta",
    "estimate_f_delta_curve",
    "estimate_marginal_cdf",
    "estimate_partial_cdfs",
    "estimate_partial_ft",
    "estimate_tt",
    "estimate_tut",
    "estimate_ucate",
    "estimate_ucdite",
    "estimate_ucvate",
    "estimate_variance_moments",
    "frechet_bounds",
    "local_poly_regress",
    "makarov_bounds_avg",
    "makarov_bounds_curve",
    "makarov_bounds_uncond",
    "oracle_deconv",
    "pipeline_estimate",
    "prob_positive_effect",
    "qte",
    "variance_bound_check",
    "variance_bounds",
    "variance_decomposition",
]
