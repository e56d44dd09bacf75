"""Importance sampling squared: Bayesian inference with unbiased likelihood estimates."""

from .algorithm import RunResult, adapt_proposal, exact_draws, run_is2, tnv_curve, with_synthetic_noise
from .core import (
    DrawSet,
    MarginalLikelihoodEstimate,
    PosteriorEstimate,
    WeightedDraw,
    adjusted_ess,
    asymptotic_variance_estimate,
    bootstrap_mc_se,
    coordinate,
    ess,
    indicator,
    marginal_likelihood_estimate,
    self_normalized_estimate,
    standard_is_estimate,
    trimmed_estimate,
)
from .drawset_io import read_drawset, write_drawset
from .errors import (
    AllWeightsZero,
    ConfigError,
    InitFailure,
    IS2Error,
    NonFiniteWeight,
    NotConverged,
    NumericalFailure,
    OddCount,
    ParticleCollapse,
    TooFewDraws,
    TooFewParticles,
    TooFewPilots,
)
from .likelihood import (
    DefensiveMixture,
    LatentProposal,
    LikelihoodEstimate,
    LogLikDiagnostics,
    antithetic_pairs,
    bootstrap_particle_filter,
    is_likelihood_estimate,
    loglik_diagnostics,
    stratified_allocation,
)
from .pmmh import PmmhChain, compare_is2_pmmh, pmmh_run
from .proposals import ParameterProposal, fit_from_weighted_draws
from .summary import PosteriorSummary, summarize, weighted_quantile
from .tuning import (
    CostModel,
    MlCostInputs,
    TuningProfile,
    ct_star,
    estimate_gamma_bar,
    inflation_factor,
    jackknife_loglik_variance,
    ml_ct_star,
    ml_inflation_factor,
    panel_particle_allocation,
    required_samples,
    sigma2_min_ml,
    sigma2_opt,
    tnv,
    tune_particles,
)

__version__ = "0.1.0"
