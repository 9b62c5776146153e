"""Trainable model roles: the epsilon denoiser and the diffused estimator.

Both wrappers take and return NumPy arrays in diffusion space ``[-1, 1]``
with layout ``(B, H, W, C)``; the torch networks run in NCHW float32.
"""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import InputError, ShapeError, TrainingError
from . import networks

log = logging.getLogger(__name__)


def to_diffusion(x):
    return 2.0 * np.asarray(x, dtype=np.float64) - 1.0


def from_diffusion(x):
    return np.clip((np.asarray(x, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)


def _to_torch(x: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(np.moveaxis(x, -1, 1), dtype=np.float32))


def _to_numpy(x: torch.Tensor) -> np.ndarray:
    return np.moveaxis(x.detach().numpy().astype(np.float64), 1, -1)


@dataclass
class TrainConfig:
    arch: str
    arch_kwargs: dict = field(default_factory=dict)
    steps: int = 1000
    batch_size: int = 16
    lr_max: float = 1e-4
    lr_min: float = 1e-6
    ema_decay: float = 0.0
    hflip: bool = True
    seed: int = 0
    log_every: int = 100

    def to_dict(self) -> dict:
        return asdict(self)


class _NetModel:
    kind = ""
    chunk = 256

    def __init__(self, net, config: TrainConfig, loss_history=(), fingerprint=None):
        self.net = net.eval()
        self.config = config
        self.loss_history = list(loss_history)
        self.fingerprint = fingerprint

    @classmethod
    def build(cls, config: TrainConfig, fingerprint=None):
        torch.manual_seed(config.seed)
        return cls(networks.build(config.arch, **config.arch_kwargs), config, fingerprint=fingerprint)

    def state(self) -> dict:
        return {
            "kind": self.kind,
            "arch": self.config.arch,
            "config": self.config.to_dict(),
            "schedule_fingerprint": self.fingerprint,
            "loss_history": list(self.loss_history),
            "state_dict": self.net.state_dict(),
        }

    @classmethod
    def from_state(cls, state: dict):
        if state.get("kind") != cls.kind:
            raise InputError(f"checkpoint holds a {state.get('kind')!r}, expected {cls.kind!r}")
        config = TrainConfig(**state["config"])
        net = networks.build(config.arch, **config.arch_kwargs)
        net.load_state_dict(state["state_dict"])
        return cls(net, config, state["loss_history"], state["schedule_fingerprint"])

    def _run(self, *args):
        with torch.no_grad():
            return self.net(*args)


class DenoiserModel(_NetModel):
    """Predicts the noise in ``x_t`` at base timestep ``t``."""

    kind = "denoiser"

    def __call__(self, x_t, t) -> np.ndarray:
        x_t = np.asarray(x_t)
        t = np.broadcast_to(np.asarray(t, dtype=np.int64), (x_t.shape[0],))
        out = [_to_numpy(self._run(_to_torch(x_t[i:i + self.chunk]), torch.from_numpy(t[i:i + self.chunk].copy())))
               for i in range(0, x_t.shape[0], self.chunk)]
        return np.concatenate(out, axis=0)


class DiffusedEstimator(_NetModel):
    """Initial HQ prediction ``f(y_0)``, clamped to ``[-1, 1]``."""

    kind = "estimator"

    def __call__(self, y0) -> np.ndarray:
        y0 = np.asarray(y0)
        out = [_to_numpy(self._run(_to_torch(y0[i:i + self.chunk])))
               for i in range(0, y0.shape[0], self.chunk)]
        return np.clip(np.concatenate(out, axis=0), -1.0, 1.0)


def _optimizer(net, config: TrainConfig):
    opt = torch.optim.Adam(net.parameters(), lr=config.lr_max)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=max(config.steps, 1), eta_min=config.lr_min)
    return opt, sched


def _flip(batch: torch.Tensor, gen: torch.Generator, *others):
    mask = torch.rand(batch.shape[0], generator=gen) < 0.5
    outs = []
    for x in (batch, *others):
        x = x.clone()
        x[mask] = x[mask].flip(-1)
        outs.append(x)
    return outs


def _fit(model: _NetModel, loss_fn, n_items: int):
    cfg = model.config
    net = model.net.train()
    opt, sched = _optimizer(net, cfg)
    ema = copy.deepcopy(net).eval() if cfg.ema_decay > 0 else None
    gen = torch.Generator().manual_seed(cfg.seed)
    history = []
    for step in range(cfg.steps):
        idx = torch.randint(0, n_items, (cfg.batch_size,), generator=gen)
        loss = loss_fn(net, idx, gen)
        value = float(loss.detach())
        if not math.isfinite(value):
            raise TrainingError(f"{model.kind} loss diverged at step {step}")
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        sched.step()
        history.append(value)
        if ema is not None:
            with torch.no_grad():
                for pe, p in zip(ema.parameters(), net.parameters()):
                    pe.lerp_(p, 1.0 - cfg.ema_decay)
        if cfg.log_every and (step + 1) % cfg.log_every == 0:
            log.info("%s step %d/%d loss %.5f", model.kind, step + 1, cfg.steps,
                     float(np.mean(history[-cfg.log_every:])))
    model.net = (ema if ema is not None else net).eval()
    model.loss_history = history
    return model


def train_estimator(lq, hq, config: TrainConfig) -> DiffusedEstimator:
    """Fit ``f`` by minimising the MSE between ``f(lq)`` and ``hq``.

    ``lq`` and ``hq`` are aligned ``(B, H, W, C)`` arrays in ``[0, 1]``.
    """
    lq, hq = np.asarray(lq), np.asarray(hq)
    if lq.shape[0] == 0:
        raise InputError("cannot train on an empty dataset")
    if lq.shape != hq.shape:
        raise ShapeError(f"lq {lq.shape} and hq {hq.shape} are not aligned")
    x_lq, x_hq = _to_torch(to_diffusion(lq)), _to_torch(to_diffusion(hq))

    def loss_fn(net, idx, gen):
        y, x = x_lq[idx], x_hq[idx]
        if config.hflip:
            y, x = _flip(y, gen, x)
        return F.mse_loss(net(y), x)

    return _fit(DiffusedEstimator.build(config), loss_fn, lq.shape[0])


def train_denoiser(hq, schedule, config: TrainConfig) -> DenoiserModel:
    """Standard epsilon-prediction objective with ``t`` uniform over ``1..T``."""
    hq = np.asarray(hq)
    if hq.shape[0] == 0:
        raise InputError("cannot train on an empty dataset")
    base = schedule.base
    x_hq = _to_torch(to_diffusion(hq))
    sqrt_a = torch.from_numpy(np.sqrt(base.alphas_cum)).float()
    sqrt_1ma = torch.from_numpy(np.sqrt(base.alphas_cum_complement)).float()

    def loss_fn(net, idx, gen):
        x0 = x_hq[idx]
        if config.hflip:
            (x0,) = _flip(x0, gen)
        t = torch.randint(1, base.T + 1, (x0.shape[0],), generator=gen)
        eps = torch.randn(x0.shape, generator=gen)
        per_item = (-1,) + (1,) * (x0.ndim - 1)  # images or plain vectors
        x_t = sqrt_a[t - 1].view(per_item) * x0 + sqrt_1ma[t - 1].view(per_item) * eps
        return F.mse_loss(net(x_t, t), eps)

    return _fit(DenoiserModel.build(config, base.fingerprint), loss_fn, hq.shape[0])
