"""Experiment configuration as strict TOML.

Unknown sections or keys are rejected rather than ignored.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli
import tomli_w

from .errors import ConfigError
from .models.core import TrainConfig
from .schedule import make_linear_schedule, respace


@dataclass
class ScheduleConfig:
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def build(self):
        return make_linear_schedule(self.T, self.beta_start, self.beta_end)


@dataclass
class DataConfig:
    size: int = 32
    train_count: int = 2000
    test_count: int = 400


@dataclass
class SamplerConfig:
    N: int = 400
    respacing: int = 250
    seeds: list = field(default_factory=lambda: [0])


@dataclass
class PathsConfig:
    runs_dir: str = "runs"
    datasets_dir: str = "datasets"


def _estimator_default():
    return TrainConfig(arch="residual", steps=3000, batch_size=32, lr_max=1e-3, lr_min=1e-5)


def _denoiser_default():
    return TrainConfig(arch="unet", arch_kwargs={"width": 32}, steps=3000, batch_size=64,
                       lr_max=2e-3, lr_min=1e-5, ema_decay=0.995)


@dataclass
class ExperimentConfig:
    seed: int = 0
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    data: DataConfig = field(default_factory=DataConfig)
    estimator: TrainConfig = field(default_factory=_estimator_default)
    denoiser: TrainConfig = field(default_factory=_denoiser_default)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def build_schedule(self):
        return self.schedule.build()

    def sampling_schedule(self):
        base = self.build_schedule()
        return respace(base, self.sampler.respacing) if self.sampler.respacing < base.T else base

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {"schedule": ScheduleConfig, "data": DataConfig, "estimator": TrainConfig,
             "denoiser": TrainConfig, "sampler": SamplerConfig, "paths": PathsConfig}


def _build(cls, raw: dict, where: str, base=None):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")
    values = asdict(base) if base is not None else {}
    values.update(raw)
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def config_from_dict(raw: dict) -> ExperimentConfig:
    default = ExperimentConfig()
    unknown = set(raw) - {"seed", *_SECTIONS}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    kwargs = {"seed": int(raw.get("seed", default.seed))}
    for name, cls in _SECTIONS.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        kwargs[name] = _build(cls, section, name, getattr(default, name))
    cfg = ExperimentConfig(**kwargs)
    try:
        cfg.build_schedule()
        if cfg.sampler.respacing < 1 or cfg.sampler.respacing > cfg.schedule.T:
            raise ConfigError("sampler.respacing must be within 1..T")
        if not 1 <= cfg.sampler.N < cfg.schedule.T:
            raise ConfigError("sampler.N must satisfy 1 <= N < T")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _read_toml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        return tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    return config_from_dict(_read_toml(path))


def load_schedule_config(path) -> ScheduleConfig:
    """Only the ``[schedule]`` table, for commands that need nothing else."""
    raw = _read_toml(path)
    unknown = set(raw) - {"seed", *_SECTIONS}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    cfg = _build(ScheduleConfig, raw.get("schedule", {}), "schedule", ScheduleConfig())
    try:
        cfg.build()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_config(cfg))
    return path
