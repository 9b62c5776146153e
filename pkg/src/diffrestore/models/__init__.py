from .core import (DenoiserModel, DiffusedEstimator, TrainConfig, from_diffusion, to_diffusion,
                   train_denoiser, train_estimator)
from .gmm import GaussianMixtureWorld, GMOptimalDenoiser, gm_optimal_denoiser
from .reverse import posterior_coefficients, predict_x0, reverse_moments

__all__ = [
    "DenoiserModel", "DiffusedEstimator", "TrainConfig", "from_diffusion", "to_diffusion",
    "train_denoiser", "train_estimator", "GaussianMixtureWorld", "GMOptimalDenoiser",
    "gm_optimal_denoiser", "posterior_coefficients", "predict_x0", "reverse_moments",
]
