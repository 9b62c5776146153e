"""Reverse-process Gaussian moments from an epsilon-predicting denoiser."""
from __future__ import annotations

import math

import numpy as np

from ..errors import NumericError, ShapeError
from ..schedule import check_timestep

FIXED_SMALL = "posterior"  # beta-tilde_t
FIXED_LARGE = "beta"       # beta_t


def predict_x0(x_t, eps, alpha_cum, complement=None):
    """Invert the forward marginal; ``complement`` is ``1 - alpha_cum`` if known more precisely."""
    complement = 1.0 - alpha_cum if complement is None else complement
    return (x_t - math.sqrt(complement) * eps) / math.sqrt(alpha_cum)


def posterior_coefficients(schedule, t: int):
    """Coefficients of ``E[x_{t-1} | x_t, x_0] = c_x0 * x_0 + c_xt * x_t`` and ``beta-tilde_t``."""
    check_timestep(schedule, t)
    a_prev = schedule.alpha_cum(t - 1)
    comp_t = schedule.alpha_complement(t)
    comp_prev = schedule.alpha_complement(t - 1)
    b_t = schedule.beta(t)
    c_x0 = b_t * math.sqrt(a_prev) / comp_t
    c_xt = comp_prev * math.sqrt(1.0 - b_t) / comp_t
    var = b_t * comp_prev / comp_t
    return c_x0, c_xt, var


def call_denoiser(denoiser, x_t, t: int, schedule) -> np.ndarray:
    """Evaluate ``denoiser`` at chain index ``t``, passing the model's own timestep."""
    model_t = int(schedule.timesteps[t - 1])
    eps = np.asarray(denoiser(x_t, np.full(x_t.shape[0], model_t, dtype=np.int64)), dtype=np.float64)
    if eps.shape != x_t.shape:
        raise ShapeError(f"denoiser returned shape {eps.shape}, expected {x_t.shape}")
    if not np.all(np.isfinite(eps)):
        raise NumericError(f"denoiser produced non-finite output at t={model_t}")
    return eps


def reverse_moments(x_t, t: int, denoiser, schedule, variance: str = FIXED_SMALL,
                    clip_x0: tuple[float, float] | None = (-1.0, 1.0)):
    """Mean and variance of ``p(x_{t-1} | x_t)``.

    ``x_t`` is batched on axis 0.  ``t`` is a chain index of ``schedule`` (a
    base or respaced schedule); the denoiser is called with the matching base
    timestep.  ``clip_x0=None`` disables clamping of the ``x_0`` estimate.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    eps = call_denoiser(denoiser, x_t, t, schedule)
    x0 = predict_x0(x_t, eps, schedule.alpha_cum(t), schedule.alpha_complement(t))
    if clip_x0 is not None:
        x0 = np.clip(x0, *clip_x0)
    c_x0, c_xt, var = posterior_coefficients(schedule, t)
    if variance == FIXED_LARGE:
        var = schedule.beta(t)
    elif variance != FIXED_SMALL:
        raise ValueError(f"unknown variance mode {variance!r}")
    return c_x0 * x0 + c_xt * x_t, var
