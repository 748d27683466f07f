"""Numerical laboratory for memorized generative priors in Bayesian inverse problems.

The package covers the full pipeline: isotropic Gaussian-mixture priors
centered on training data (the exact minimizer of denoising score matching
on a finite dataset), closed-form linearized mixture posteriors, a
frequency-domain Helmholtz forward operator with adjoint-state gradients,
Karhunen-Loeve field parameterizations, reverse-diffusion samplers with
likelihood guidance, a trainable MLP denoiser, and memorization /
calibration diagnostics.

Submodules load lazily so the command-line entry point can pin BLAS thread
counts through environment variables before numpy is first imported.
"""

import importlib

__version__ = "0.1.0"

# public name -> defining submodule
_EXPORTS = {
    "NoiseSchedule": "schedules",
    "GaussianMixturePrior": "prior",
    "ForwardOperator": "operators",
    "Cubic1DOperator": "operators",
    "Pentagon2DOperator": "operators",
    "MatrixOperator": "operators",
    "Observation": "operators",
    "STYLIZED_1D_TRAINING": "operators",
    "pentagon_training_set": "operators",
    "synthesize_observation": "operators",
    "KarhunenLoeveBasis": "klfield",
    "HelmholtzConfig": "helmholtz",
    "HelmholtzSolver": "helmholtz",
    "HelmholtzKLOperator": "helmholtz",
    "MixturePosterior": "posteriors",
    "GridPosterior": "posteriors",
    "empirical_posterior_weights": "posteriors",
    "grid_posterior": "posteriors",
    "linearized_posterior": "posteriors",
    "mixture_moments": "posteriors",
    "mixture_sample": "posteriors",
    "sigma_zero_limit_check": "posteriors",
    "total_variation": "posteriors",
    "DenoisingScoreNet": "score_net",
    "SamplerConfig": "samplers",
    "sample_unconditional": "samplers",
    "sample_dps": "samplers",
    "nearest_neighbor_ratio": "diagnostics",
    "memorization_rate": "diagnostics",
    "posterior_summary": "diagnostics",
    "calibration_pairs": "diagnostics",
}

__all__ = ["__version__"] + sorted(_EXPORTS)


def __getattr__(name):
    if name in _EXPORTS:
        module = importlib.import_module(f".{_EXPORTS[name]}", __name__)
        value = getattr(module, name)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
