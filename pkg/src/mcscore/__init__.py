"""Score-based sampling of unnormalized densities with Monte Carlo score estimates."""

__version__ = "0.1.0"

from .diffusion import DiffusionTime, forward_sample, make_time, perturbation_points
from .estimator import ReverseDiffusionSampler
from .exceptions import (
    DomainTooSmallError,
    EstimationError,
    IntegrationError,
    MCScoreError,
    UsageError,
)
from .oracle import (
    ModeReport,
    ModeSpec,
    analytic_score_gaussian_mixture,
    mode_probability_estimates,
    mode_proportions,
    mode_report,
    quadrature_score_1d,
    window_masses_1d,
)
from .sampler import RunResult, SamplerConfig, reverse_step, sample_batch, sample_one
from .score import ScoreBatch, SwitchPolicy, estimate_score, importance_weights, score_s1, score_s2
from .target import (
    GaussianMixtureSpec,
    TargetDensity,
    grad_log_likelihood,
    log_likelihood,
    make_constant,
    make_gaussian_mixture,
    make_himmelblau,
    make_tanh_bumps_1d,
)
