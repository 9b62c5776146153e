"""Gaussian-mixture data world with a closed-form Bayes-optimal denoiser.

Data ``x_0 ~ sum_k w_k N(mu_k, s^2 I)`` in ``d`` dimensions.  Under the forward
marginal ``x_t = sqrt(a) x_0 + sqrt(1-a) eps`` every component stays Gaussian,
so ``E[eps | x_t]`` is available exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from ..errors import ParameterError


@dataclass(frozen=True, eq=False)
class GaussianMixtureWorld:
    means: np.ndarray
    std: float
    weights: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        weights = np.asarray(self.weights, dtype=np.float64)
        if means.shape[1] > 8:
            raise ParameterError("mixture worlds are limited to d <= 8")
        if weights.shape != (means.shape[0],) or np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
            raise ParameterError("weights must be non-negative, one per component, summing to 1")
        if self.std <= 0:
            raise ParameterError("component std must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights / weights.sum())

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @classmethod
    def default(cls, dim: int = 4, components: int = 3, std: float = 0.1, seed: int = 0):
        rng = np.random.default_rng(seed)
        means = rng.uniform(-0.7, 0.7, size=(components, dim))
        return cls(means, std, np.full(components, 1.0 / components))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        k = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.means[k] + self.std * rng.standard_normal((n, self.dim))

    def marginal_params(self, alpha_cum: float):
        """Component means and shared variance of ``q(x_t)``."""
        return np.sqrt(alpha_cum) * self.means, alpha_cum * self.std ** 2 + (1.0 - alpha_cum)

    def log_density(self, x, alpha_cum: float = 1.0) -> np.ndarray:
        m, v = self.marginal_params(alpha_cum)
        x = np.atleast_2d(x)
        d2 = ((x[:, None, :] - m[None]) ** 2).sum(-1)
        log_comp = -0.5 * d2 / v - 0.5 * self.dim * np.log(2 * np.pi * v)
        return logsumexp(log_comp + np.log(self.weights)[None], axis=1)

    def posterior_mean_x0(self, x_t, alpha_cum: float) -> np.ndarray:
        """``E[x_0 | x_t]`` under the forward marginal."""
        x_t = np.asarray(x_t, dtype=np.float64)
        m, v = self.marginal_params(alpha_cum)
        d2 = ((x_t[:, None, :] - m[None]) ** 2).sum(-1)
        resp = softmax(np.log(self.weights)[None] - 0.5 * d2 / v, axis=1)
        gain = np.sqrt(alpha_cum) * self.std ** 2 / v
        cond = self.means[None] + gain * (x_t[:, None, :] - m[None])
        return (resp[..., None] * cond).sum(axis=1)


class GMOptimalDenoiser:
    """Bayes-optimal epsilon predictor for a :class:`GaussianMixtureWorld`."""

    def __init__(self, world: GaussianMixtureWorld, schedule):
        self.world = world
        self.schedule = schedule.base
        self.fingerprint = self.schedule.fingerprint

    def __call__(self, x_t, t) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        t = np.broadcast_to(np.asarray(t), (x_t.shape[0],))
        out = np.empty_like(x_t)
        for tv in np.unique(t):
            rows = t == tv
            a = float(self.schedule.alphas_cum[int(tv) - 1])
            x0 = self.world.posterior_mean_x0(x_t[rows], a)
            out[rows] = (x_t[rows] - np.sqrt(a) * x0) / np.sqrt(self.schedule.alpha_complement(int(tv)))
        return out


def gm_optimal_denoiser(world: GaussianMixtureWorld, schedule) -> GMOptimalDenoiser:
    return GMOptimalDenoiser(world, schedule)
