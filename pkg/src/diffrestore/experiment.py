"""End-to-end toy pipeline: synthesize data, train both models, evaluate.

Used by the CLI and the acceptance suite.  Every stochastic stage draws its
seed from :func:`derive_seed` so one root seed pins the whole experiment.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import toyfaces
from .degradation import DegradationRanges, degrade, sample_spec
from .models.core import TrainConfig, train_denoiser, train_estimator

log = logging.getLogger(__name__)


def derive_seed(root: int, stage: str) -> int:
    """Sub-seed for a named stage: ``SeedSequence([root, crc32(stage)])``."""
    ss = np.random.SeedSequence([int(root), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0] & 0x7FFFFFFF)


def quantize(x: np.ndarray) -> np.ndarray:
    """Round to 8-bit levels, as written to PNG."""
    return np.round(np.clip(x, 0, 1) * 255.0) / 255.0


@dataclass
class PairSet:
    hq: np.ndarray
    lq: np.ndarray
    specs: list = field(default_factory=list)


def make_pairs(count: int, mode: str, seed: int, size: int = 32) -> PairSet:
    """HQ toy faces and their degraded LQ versions, both 8-bit quantized."""
    hq = quantize(toyfaces.render_faces(count, derive_seed(seed, f"faces/{mode}"), size))
    rng = np.random.default_rng(derive_seed(seed, f"specs/{mode}"))
    ranges = DegradationRanges.for_mode(mode)
    specs = [sample_spec(ranges, rng) for _ in range(count)]
    lq = np.stack([quantize(degrade(x, sp)) for x, sp in zip(hq, specs)]) if count else hq.copy()
    return PairSet(hq, lq, specs)


def default_estimator_config(arch: str = "residual", seed: int = 0) -> TrainConfig:
    return TrainConfig(arch=arch, steps=3000, batch_size=32, lr_max=1e-3, lr_min=1e-5,
                       seed=derive_seed(seed, f"train/estimator/{arch}"))


def default_denoiser_config(seed: int = 0) -> TrainConfig:
    return TrainConfig(arch="unet", arch_kwargs={"width": 32}, steps=3000, batch_size=64,
                       lr_max=2e-3, lr_min=1e-5, ema_decay=0.995,
                       seed=derive_seed(seed, "train/denoiser"))


def train_models(train: PairSet, schedule, estimator_config: TrainConfig, denoiser_config: TrainConfig):
    log.info("training estimator (%s, %d steps)", estimator_config.arch, estimator_config.steps)
    est = train_estimator(train.lq, train.hq, estimator_config)
    log.info("training denoiser (%d steps)", denoiser_config.steps)
    den = train_denoiser(train.hq, schedule, denoiser_config)
    return est, den
