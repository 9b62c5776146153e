"""Discrete-time diffusion schedules and their respacing to shorter chains.

Timesteps are 1-based throughout: ``t = 1..T``.  Arrays are stored 0-based,
so ``betas[t - 1]`` is the variance added at step ``t``.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError, ShapeError

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def fingerprint_betas(betas) -> str:
    return hashlib.sha256(np.ascontiguousarray(betas, dtype=np.float64).tobytes()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Variance schedule ``beta_t`` with cumulative products ``alpha_t``."""

    betas: np.ndarray
    alphas_cum: np.ndarray = field(init=False)
    log_alphas_cum: np.ndarray = field(init=False, repr=False)
    alphas_cum_complement: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        betas = _readonly(self.betas)
        if betas.ndim != 1 or betas.size == 0:
            raise ParameterError("betas must be a non-empty 1-D sequence")
        if not np.all((betas > 0) & (betas < 1)):
            raise ParameterError("every beta must lie in (0, 1)")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas_cum", _readonly(np.cumprod(1.0 - betas)))
        # 1 - alpha_t via expm1 keeps full precision when the betas are tiny
        log_alphas = np.cumsum(np.log1p(-betas))
        object.__setattr__(self, "log_alphas_cum", _readonly(log_alphas))
        object.__setattr__(self, "alphas_cum_complement", _readonly(-np.expm1(log_alphas)))

    @property
    def T(self) -> int:
        return int(self.betas.size)

    @property
    def timesteps(self) -> np.ndarray:
        """Model timestep for every chain index (identity for a base schedule)."""
        return np.arange(1, self.T + 1)

    @property
    def base(self) -> "NoiseSchedule":
        return self

    @property
    def fingerprint(self) -> str:
        return fingerprint_betas(self.betas)

    def alpha_cum(self, t: int) -> float:
        """``alpha_t`` with the convention ``alpha_0 = 1``."""
        check_timestep(self, t, allow_zero=True)
        return 1.0 if t == 0 else float(self.alphas_cum[t - 1])

    def alpha_complement(self, t: int) -> float:
        """``1 - alpha_t``, accurate even when ``alpha_t`` is within rounding of 1."""
        check_timestep(self, t, allow_zero=True)
        return 0.0 if t == 0 else float(self.alphas_cum_complement[t - 1])

    def beta(self, t: int) -> float:
        check_timestep(self, t)
        return float(self.betas[t - 1])

    def __eq__(self, other):
        if not isinstance(other, NoiseSchedule) or isinstance(other, RespacedSchedule):
            return NotImplemented
        return np.array_equal(self.betas, other.betas)

    def __hash__(self):
        return hash(self.fingerprint)

    def __repr__(self):
        return f"NoiseSchedule(T={self.T}, fingerprint={self.fingerprint})"


@dataclass(frozen=True, eq=False)
class RespacedSchedule:
    """A shorter chain over a subset of the base timesteps.

    ``alphas_cum`` is copied from the base schedule at the kept steps, and
    ``betas`` are the effective per-step variances that reproduce it.
    """

    base: NoiseSchedule
    kept_timesteps: np.ndarray
    betas: np.ndarray = field(init=False)
    alphas_cum: np.ndarray = field(init=False)
    alphas_cum_complement: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kept = np.asarray(self.kept_timesteps, dtype=np.int64)
        if kept.ndim != 1 or kept.size == 0:
            raise ParameterError("kept_timesteps must be non-empty")
        if kept[0] < 1 or kept[-1] > self.base.T or np.any(np.diff(kept) <= 0):
            raise ParameterError("kept_timesteps must be strictly increasing within 1..T")
        kept.setflags(write=False)
        log_alphas = self.base.log_alphas_cum[kept - 1]
        log_prev = np.concatenate([[0.0], log_alphas[:-1]])
        object.__setattr__(self, "kept_timesteps", kept)
        object.__setattr__(self, "alphas_cum", _readonly(self.base.alphas_cum[kept - 1]))
        object.__setattr__(self, "alphas_cum_complement", _readonly(self.base.alphas_cum_complement[kept - 1]))
        object.__setattr__(self, "betas", _readonly(-np.expm1(log_alphas - log_prev)))

    @property
    def T(self) -> int:
        return int(self.kept_timesteps.size)

    @property
    def timesteps(self) -> np.ndarray:
        return self.kept_timesteps

    @property
    def fingerprint(self) -> str:
        return self.base.fingerprint

    def alpha_cum(self, k: int) -> float:
        check_timestep(self, k, allow_zero=True)
        return 1.0 if k == 0 else float(self.alphas_cum[k - 1])

    def alpha_complement(self, k: int) -> float:
        check_timestep(self, k, allow_zero=True)
        return 0.0 if k == 0 else float(self.alphas_cum_complement[k - 1])

    def beta(self, k: int) -> float:
        check_timestep(self, k)
        return float(self.betas[k - 1])

    def index_of(self, n: int) -> int:
        """Chain index of the latest kept timestep not after base step ``n``."""
        if not 0 <= n <= self.base.T:
            raise ParameterError(f"timestep {n} outside 0..{self.base.T}")
        return int(np.searchsorted(self.kept_timesteps, n, side="right"))

    def __repr__(self):
        return f"RespacedSchedule(T={self.T}, base={self.base!r})"


def check_timestep(schedule, t, allow_zero=False):
    lo = 0 if allow_zero else 1
    if not isinstance(t, (int, np.integer)) or not lo <= t <= schedule.T:
        raise ParameterError(f"timestep {t!r} outside {lo}..{schedule.T}")


def make_linear_schedule(T: int = DEFAULT_T, beta_start: float = DEFAULT_BETA_START,
                         beta_end: float = DEFAULT_BETA_END) -> NoiseSchedule:
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ParameterError(f"T must be a positive integer, got {T!r}")
    if not 0 < beta_start <= beta_end < 1:
        raise ParameterError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    return NoiseSchedule(np.linspace(beta_start, beta_end, T, dtype=np.float64))


def default_schedule() -> NoiseSchedule:
    return make_linear_schedule(DEFAULT_T, DEFAULT_BETA_START, DEFAULT_BETA_END)


def kappa(schedule, N: int) -> float:
    """Weight ``alpha_N / (1 - alpha_N)`` of the transition KL."""
    check_timestep(schedule, N)
    a = float(schedule.alphas_cum[N - 1])
    comp = float(schedule.alphas_cum_complement[N - 1])
    if comp <= 0.0:
        raise ParameterError(f"alpha_cum at N={N} is 1; kappa is unbounded")
    return a / comp


def kappas(schedule) -> np.ndarray:
    return np.asarray(schedule.alphas_cum) / np.asarray(schedule.alphas_cum_complement)


def _check_noise(x, noise):
    x = np.asarray(x, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if x.shape != noise.shape:
        raise ShapeError(f"noise shape {noise.shape} does not match input shape {x.shape}")
    return x, noise


def diffuse(x0, N: int, schedule, noise) -> np.ndarray:
    """Sample ``q(x_N | x_0)`` with the given standard-normal ``noise``."""
    x0, noise = _check_noise(x0, noise)
    check_timestep(schedule, N)
    a = float(schedule.alphas_cum[N - 1])
    return math.sqrt(a) * x0 + math.sqrt(float(schedule.alphas_cum_complement[N - 1])) * noise


def diffuse_step(x_prev, t: int, schedule, noise) -> np.ndarray:
    """One Markov step ``q(x_t | x_{t-1})``."""
    x_prev, noise = _check_noise(x_prev, noise)
    check_timestep(schedule, t)
    b = float(schedule.betas[t - 1])
    return math.sqrt(1.0 - b) * x_prev + math.sqrt(b) * noise


def respace(schedule: NoiseSchedule, target_steps: int) -> RespacedSchedule:
    """Keep ``target_steps`` evenly strided timesteps, always including ``T``.

    Kept step ``k`` is ``k * T / target_steps`` rounded half-down, so a
    1000-step schedule respaced to 250 keeps ``4, 8, ..., 1000``.
    """
    T = schedule.T
    if not isinstance(target_steps, (int, np.integer)) or not 1 <= target_steps <= T:
        raise ParameterError(f"target_steps must be in 1..{T}, got {target_steps!r}")
    k = np.arange(1, target_steps + 1, dtype=np.int64)
    # exact integer round-half-down of k*T/target_steps
    kept = (2 * k * T + target_steps - 1) // (2 * target_steps)
    return RespacedSchedule(schedule.base, kept)


def chain_length(schedule, N: int) -> int:
    """Number of reverse steps run when starting from base timestep ``N``."""
    if isinstance(schedule, RespacedSchedule):
        return schedule.index_of(N)
    check_timestep(schedule, N, allow_zero=True)
    return int(N)


def export_csv(schedule, path) -> Path:
    """Write ``t, beta, alpha_cum, kappa`` rows for every chain step."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ks = kappas(schedule)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "beta", "alpha_cum", "kappa"])
        for t, b, a, k in zip(schedule.timesteps, schedule.betas, schedule.alphas_cum, ks):
            w.writerow([int(t), repr(float(b)), repr(float(a)), repr(float(k))])
    return path
