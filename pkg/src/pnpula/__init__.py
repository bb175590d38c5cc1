"""Plug-and-play unadjusted Langevin sampling with exact Gaussian-mixture
denoisers, plus metrics quantifying the sensitivity of the sampling
distribution to denoiser and forward-model mismatch."""

from .errors import (
    ConfigError,
    DegenerateInputError,
    DegenerateModelError,
    DimensionMismatchError,
    DivergenceError,
    InsufficientDataError,
    PnpUlaError,
    SampleBudgetError,
)
from .forward import (
    LinearForwardModel,
    concavity_constant,
    likelihood_score,
    lipschitz_constant,
    load_forward_model,
    operator_distance,
)
from .gmm import (
    ExactMmseDenoiser,
    GaussianComponent,
    GaussianMixture,
    MismatchedDenoiser,
    PosteriorMixture,
    crossed_gmm_2d,
    exact_mmse_denoise,
    gmm_log_density,
    gmm_posterior,
    gmm_sample,
    gmm_score,
    load_gmm,
    mismatched_denoise,
    smoothed_mixture,
    smoothed_prior_score,
)
from .metrics import (
    PseudometricReport,
    TransportEstimate,
    lipschitz_estimate,
    mmse_estimate,
    pearson_r,
    posterior_l2,
    prior_l2,
    same_distribution_floor,
    spearman_r,
    tv_histogram,
    variance_estimate,
    wasserstein1_estimate,
    wasserstein1_exact,
)
from .sampler import (
    BallProjection,
    BoxProjection,
    ChainParams,
    DriftConfig,
    drift,
    max_step_size,
    project,
    recommended_params,
    run_chain,
    ula_step,
)
from .samples import SampleSet, derive_seed

__version__ = "0.1.0"
