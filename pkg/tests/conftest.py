"""Shared fixtures: a cached toy pipeline and the acceptance report collector."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pytest

from diffrestore import store
from diffrestore.experiment import (PairSet, default_denoiser_config, default_estimator_config, make_pairs,
                                    train_models)
from diffrestore.models import DenoiserModel, DiffusedEstimator
from diffrestore.schedule import default_schedule

CACHE_ENV = "DIFFRESTORE_TOY_CACHE"

# Toy pipeline sizes.  Changing any value invalidates the cache.
TOY = {
    "seed": 0,
    "size": 32,
    "train_count": 2000,
    "test_count": 400,
    "estimator_steps": 3000,
    "denoiser_steps": 3000,
    "version": 1,
}


@dataclass
class ToyPipeline:
    train: PairSet
    test: PairSet
    estimator: DiffusedEstimator
    denoiser: DenoiserModel
    schedule: object
    build_seconds: float
    notes: dict = field(default_factory=dict)


def _cache_dir() -> Path:
    root = Path(os.environ.get(CACHE_ENV, Path(__file__).resolve().parent.parent / ".toy_cache"))
    key = hashlib.sha256(json.dumps(TOY, sort_keys=True).encode()).hexdigest()[:12]
    return root / key


def _save_pairs(path, pairs: PairSet):
    np.savez_compressed(path, hq=pairs.hq, lq=pairs.lq)


def _load_pairs(path, specs=()) -> PairSet:
    with np.load(path) as z:
        return PairSet(z["hq"], z["lq"], list(specs))


def build_toy_pipeline() -> ToyPipeline:
    cache = _cache_dir()
    sched = default_schedule()
    meta_path = cache / "meta.json"
    if meta_path.exists():
        meta = store.read_json(meta_path)
        return ToyPipeline(
            _load_pairs(cache / "train.npz"), _load_pairs(cache / "test.npz"),
            store.load_model(cache / "estimator.ckpt", DiffusedEstimator),
            store.load_model(cache / "denoiser.ckpt", DenoiserModel),
            sched, meta["build_seconds"], {"cached": True})
    logging.getLogger(__name__).info("building toy pipeline in %s", cache)
    t0 = time.perf_counter()
    train = make_pairs(TOY["train_count"], "train", TOY["seed"], TOY["size"])
    test = make_pairs(TOY["test_count"], "eval", TOY["seed"], TOY["size"])
    ec = default_estimator_config(seed=TOY["seed"])
    ec.steps = TOY["estimator_steps"]
    dc = default_denoiser_config(seed=TOY["seed"])
    dc.steps = TOY["denoiser_steps"]
    est, den = train_models(train, sched, ec, dc)
    elapsed = time.perf_counter() - t0
    cache.mkdir(parents=True, exist_ok=True)
    _save_pairs(cache / "train.npz", train)
    _save_pairs(cache / "test.npz", test)
    store.save_model(est, cache / "estimator.ckpt")
    store.save_model(den, cache / "denoiser.ckpt")
    store.write_json(meta_path, {"toy": TOY, "build_seconds": elapsed})
    return ToyPipeline(train, test, est, den, sched, elapsed, {"cached": False})


@pytest.fixture(scope="session")
def toy_pipeline():
    return build_toy_pipeline()


# acceptance reporting

_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """``check(number, ok, detail)`` records a criterion line, then asserts ``ok``."""
    def check(number: int, ok: bool, detail: str):
        _RESULTS[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"
    return check


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}")
