"""Adaptive parallel tempering MCMC.

Coupled random-walk Metropolis chains at a ladder of inverse temperatures,
with stochastic-approximation tuning of the ladder spacings and of the
per-level proposal covariances, all driven toward a 0.234 mean acceptance
rate.  An independent quadrature oracle computes the stationary swap rate
and the equilibrium ladder for cross-checking the adaptation.
"""
from aptmc.ladder import TemperatureLadder, betas_from_rho, rho_from_betas
from aptmc.targets import (
    GaussianMixture,
    IsingPosterior,
    IsotropicGaussian,
    canonical_mixture,
    synthetic_floe_image,
)
from aptmc.adaptation import StepSizes
from aptmc.sampler import SamplerConfig, Sampler, run, replicate

__version__ = "0.1.0"

__all__ = [
    "TemperatureLadder",
    "betas_from_rho",
    "rho_from_betas",
    "GaussianMixture",
    "IsingPosterior",
    "IsotropicGaussian",
    "canonical_mixture",
    "synthetic_floe_image",
    "StepSizes",
    "SamplerConfig",
    "Sampler",
    "run",
    "replicate",
    "__version__",
]
