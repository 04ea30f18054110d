"""Bayesian stochastic volatility: univariate SV family and factor SV."""

__version__ = "0.1.0"

from .distributions import RngStream
from .priors import PriorSpec, default_priors, validate
from .univariate import (
    LatentPath,
    SvConfig,
    SvDraws,
    SvParams,
    run_sampler,
    simulate_sv,
)
from .forecast import (
    predict,
    predictive_likelihood,
    predictive_log_likelihood,
    predictive_quantile,
    rolling_estimate,
)
from .diagnostics import effective_sample_size, geweke_validate, summarize
from .factor import (
    FsvConfig,
    FsvDraws,
    covmat,
    evdiag,
    find_restrict,
    free_elements,
    fsv_sample,
    predcor,
    predcov,
    predloglik,
    preorder,
    simulate_fsv,
)

__all__ = [
    "RngStream",
    "PriorSpec",
    "default_priors",
    "validate",
    "LatentPath",
    "SvConfig",
    "SvDraws",
    "SvParams",
    "run_sampler",
    "simulate_sv",
    "predict",
    "predictive_likelihood",
    "predictive_log_likelihood",
    "predictive_quantile",
    "rolling_estimate",
    "effective_sample_size",
    "geweke_validate",
    "summarize",
    "FsvConfig",
    "FsvDraws",
    "covmat",
    "evdiag",
    "find_restrict",
    "free_elements",
    "fsv_sample",
    "predcor",
    "predcov",
    "predloglik",
    "preorder",
    "simulate_fsv",
]
