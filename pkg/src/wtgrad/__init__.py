"""Wasserstein temporal gradients for time-indexed one-dimensional distributions."""

__version__ = "0.1.0"

from .core import (CdfRep, QuantileGrid, QuantileRep, SupportInterval, TangentVector,
                   cdf_from_quantile, empirical_quantiles, exp_map, linearize_cdf, log_map,
                   parallel_transport, pushforward_monotone, quantile_from_cdf, tangent_inner,
                   tangent_norm, transport_map_eval, wasserstein_distance)
from .frechet import (KernelSpec, LocalWeights, TimeIndexedData, cv_bandwidth, cv_select,
                      local_frechet_curve, local_frechet_estimate, local_linear_weights,
                      weighted_frechet_mean)
from .gradient import (GradientEstimate, choose_delta, delta_stability_scan, discrepancy,
                       eval_gradient_at_x, rank_dynamics, wtg_curve, wtg_estimate)

__all__ = [
    "CdfRep", "QuantileGrid", "QuantileRep", "SupportInterval", "TangentVector",
    "cdf_from_quantile", "empirical_quantiles", "exp_map", "linearize_cdf", "log_map",
    "parallel_transport", "pushforward_monotone", "quantile_from_cdf", "tangent_inner",
    "tangent_norm", "transport_map_eval", "wasserstein_distance",
    "KernelSpec", "LocalWeights", "TimeIndexedData", "cv_bandwidth", "cv_select",
    "local_frechet_curve", "local_frechet_estimate", "local_linear_weights",
    "weighted_frechet_mean",
    "GradientEstimate", "choose_delta", "delta_stability_scan", "discrepancy",
    "eval_gradient_at_x", "rank_dynamics", "wtg_curve", "wtg_estimate",
]
