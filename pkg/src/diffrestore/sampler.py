"""Posterior sampling: diffuse an initial estimate to ``x_N`` and run the reverse chain.

All arrays live in diffusion space and are batched on axis 0.  ``N`` is
always given in base-schedule timesteps; with a respaced chain it is mapped
to the latest kept step not after ``N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, ParameterError, ShapeError
from .models.reverse import FIXED_SMALL, reverse_moments
from .schedule import RespacedSchedule, chain_length

DEFAULT_N = 400
DEFAULT_RESPACING = 250


def _streams(seed):
    """Independent generators for the ``x_N`` draw and the reverse chain."""
    a, b = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def start_index(schedule, N: int) -> int:
    k = chain_length(schedule, N)
    if k < 1:
        raise ParameterError(f"starting timestep {N} precedes the first kept step")
    return k


def start_alpha(schedule, N: int) -> float:
    return schedule.alpha_cum(start_index(schedule, N))


def start_complement(schedule, N: int) -> float:
    """``1 - alpha`` at the starting step, without cancellation."""
    return schedule.alpha_complement(start_index(schedule, N))


def sample_xN(y0, N: int, estimator, schedule, noise) -> np.ndarray:
    """Draw ``x_N ~ N(sqrt(a_N) f(y0), (1 - a_N) I)`` with the given ``noise``."""
    if not 1 <= N < schedule.base.T:
        raise ParameterError(f"starting timestep must satisfy 1 <= N < {schedule.base.T}, got {N}")
    pred = np.asarray(estimator(np.asarray(y0, dtype=np.float64)), dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if pred.shape != noise.shape:
        raise ShapeError(f"noise shape {noise.shape} does not match estimate shape {pred.shape}")
    a = start_alpha(schedule, N)
    return math.sqrt(a) * pred + math.sqrt(start_complement(schedule, N)) * noise


def reverse_chain(x_N, N: int, denoiser, schedule, seed=None, *, rng=None, variance=FIXED_SMALL,
                  clip_x0=(-1.0, 1.0), trajectory: list | None = None) -> np.ndarray:
    """Ancestral sampling from chain step ``N`` down to 1; the last step emits the mean.

    Pass either ``seed`` or an explicit ``rng``.  If ``trajectory`` is a list,
    every intermediate state (starting with ``x_N``) is appended to it.
    """
    x = np.asarray(x_N, dtype=np.float64).copy()
    if not np.all(np.isfinite(x)):
        raise NumericError("x_N contains non-finite values")
    if N == 0:
        return x
    if rng is None:
        rng = np.random.default_rng(seed)
    if trajectory is not None:
        trajectory.append(x.copy())
    for k in range(start_index(schedule, N), 0, -1):
        mean, var = reverse_moments(x, k, denoiser, schedule, variance=variance, clip_x0=clip_x0)
        if k > 1:
            x = mean + math.sqrt(var) * rng.standard_normal(x.shape)
        else:
            x = mean
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite state at reverse step {k}")
        if trajectory is not None:
            trajectory.append(x.copy())
    return x


def check_fingerprint(denoiser, schedule):
    fp = getattr(denoiser, "fingerprint", None)
    if fp is not None and fp != schedule.fingerprint:
        raise ConfigError(f"denoiser was trained with schedule {fp}, sampler uses {schedule.fingerprint}")


def difface_restore(y0, N: int, estimator, denoiser, schedule, seed, **chain_kwargs) -> np.ndarray:
    """Restore ``y0``: sample ``x_N`` around ``f(y0)``, then run the reverse chain."""
    check_fingerprint(denoiser, schedule)
    xn_rng, chain_rng = _streams(seed)
    y0 = np.asarray(y0, dtype=np.float64)
    x_N = sample_xN(y0, N, estimator, schedule, xn_rng.standard_normal(y0.shape))
    return reverse_chain(x_N, N, denoiser, schedule, rng=chain_rng, **chain_kwargs)


def reconstruct_probe(x0, N: int, denoiser, schedule, seed, **chain_kwargs) -> np.ndarray:
    """Diffuse ``x0`` to step ``N`` and reconstruct it; ``N = 0`` is a no-op.

    Uses the same seed streams as :func:`difface_restore`, so with a
    zero-error estimator the two return identical arrays.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if N == 0:
        return x0.copy()
    check_fingerprint(denoiser, schedule)
    xn_rng, chain_rng = _streams(seed)
    a = start_alpha(schedule, N)
    x_N = math.sqrt(a) * x0 + math.sqrt(start_complement(schedule, N)) * xn_rng.standard_normal(x0.shape)
    return reverse_chain(x_N, N, denoiser, schedule, rng=chain_rng, **chain_kwargs)


def pluralistic_restore(y0, N: int, estimator, denoiser, schedule, seeds, **chain_kwargs) -> list:
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise ParameterError("pluralistic seeds must be distinct")
    return [difface_restore(y0, N, estimator, denoiser, schedule, s, **chain_kwargs) for s in seeds]


@dataclass
class RestorationRun:
    """Record of one restoration call."""

    N: int
    steps: int
    seeds: list
    schedule_fingerprint: str
    respaced_to: int | None
    outputs: list = field(default_factory=list, repr=False)
    estimator_id: str = ""
    denoiser_id: str = ""

    def to_dict(self) -> dict:
        return {
            "N": self.N, "steps": self.steps, "seeds": list(self.seeds),
            "schedule_fingerprint": self.schedule_fingerprint, "respaced_to": self.respaced_to,
            "estimator_id": self.estimator_id, "denoiser_id": self.denoiser_id,
        }


def restore_run(y0, N, estimator, denoiser, schedule, seeds, estimator_id="", denoiser_id="",
                **chain_kwargs) -> RestorationRun:
    outputs = pluralistic_restore(y0, N, estimator, denoiser, schedule, seeds, **chain_kwargs)
    respaced = schedule.T if isinstance(schedule, RespacedSchedule) else None
    return RestorationRun(N, chain_length(schedule, N), list(seeds), schedule.fingerprint, respaced,
                          outputs, estimator_id, denoiser_id)
