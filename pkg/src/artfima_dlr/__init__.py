"""Bayesian dynamic linear regression with ARMA, ARFIMA and ARTFIMA errors.

The Whittle likelihood is evaluated from DFTs computed once per dataset;
exact Gaussian (Durbin-Levinson) and Kalman filter likelihoods are available
as time-domain references.
"""

__version__ = "0.1.0"

from .errors import (
    ArtfimaDlrError,
    ConfigError,
    DegenerateChainWarning,
    DomainError,
    EvaluationError,
    OptimizationError,
    ParseError,
    UnsupportedFamilyError,
)
from .fitting import FitResult, LogPosterior, fit
from .forecast import (
    ForecastTable,
    conditional_forecast,
    crps,
    dic,
    lpds,
    posterior_predictive,
    rmse,
    rolling_cv,
)
from .model import Family, ModelSpec, ParamVector, UnconstrainedParams
from .sampler import ChainResult, SamplerSettings, effective_sample_size, find_map, run_adaptive_mh
from .simulate import SimConfig, simulate_error_process, tempered_frac_weights
from .spectral import autocovariance, spectral_density
from .timedomain import gaussian_loglik, kalman_loglik
from .whittle import DftCache, precompute_dft, pseudo_dft, whittle_loglik

__all__ = [
    "ArtfimaDlrError", "ConfigError", "DegenerateChainWarning", "DomainError",
    "EvaluationError", "OptimizationError", "ParseError", "UnsupportedFamilyError",
    "FitResult", "LogPosterior", "fit",
    "ForecastTable", "conditional_forecast", "crps", "dic", "lpds", "posterior_predictive",
    "rmse", "rolling_cv",
    "Family", "ModelSpec", "ParamVector", "UnconstrainedParams",
    "ChainResult", "SamplerSettings", "effective_sample_size", "find_map", "run_adaptive_mh",
    "SimConfig", "simulate_error_process", "tempered_frac_weights",
    "autocovariance", "spectral_density",
    "gaussian_loglik", "kalman_loglik",
    "DftCache", "precompute_dft", "pseudo_dft", "whittle_loglik",
]
