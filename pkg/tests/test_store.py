import json

import numpy as np
import pytest

from diffrestore import store
from diffrestore.config import ExperimentConfig, config_from_dict, dump_config, load_config, save_config
from diffrestore.errors import ConfigError, IntegrityError, InputError
from diffrestore.experiment import derive_seed, make_pairs
from diffrestore.models import DenoiserModel, DiffusedEstimator, TrainConfig
from diffrestore.schedule import default_schedule, make_linear_schedule


def test_schedule_roundtrip(tmp_path):
    s = make_linear_schedule(37, 3e-4, 0.031)
    p = store.save_schedule(s, tmp_path / "s.json")
    back = store.load_schedule(p)
    assert np.array_equal(back.betas, s.betas) and back == s


def test_tampered_schedule(tmp_path):
    p = store.save_schedule(default_schedule(), tmp_path / "s.json")
    doc = json.loads(p.read_text())
    doc["betas"][3] = float(0.5).hex()
    p.write_text(json.dumps(doc))
    with pytest.raises(IntegrityError):
        store.load_schedule(p)


def test_manifest_roundtrip(tmp_path):
    doc = {"a": 1, "b": [1.5, "x"], "c": {"d": None}}
    p = store.write_json(tmp_path / "m.json", doc)
    assert store.read_json(p) == doc


def _tiny_denoiser():
    cfg = TrainConfig(arch="unet", arch_kwargs={"width": 8}, steps=0)
    return DenoiserModel.build(cfg, default_schedule().fingerprint)


def test_checkpoint_roundtrip(tmp_path):
    m = _tiny_denoiser()
    m.loss_history = [0.5, 0.25]
    p = store.save_model(m, tmp_path / "d.ckpt")
    back = store.load_model(p, DenoiserModel)
    assert back.fingerprint == m.fingerprint and back.loss_history == [0.5, 0.25]
    x = np.random.default_rng(0).uniform(-1, 1, (2, 32, 32, 3))
    np.testing.assert_array_equal(back(x, np.array([3, 400])), m(x, np.array([3, 400])))
    assert store.read_checkpoint_header(p)["arch"] == "unet"
    with pytest.raises(InputError):
        store.load_model(p, DiffusedEstimator)


def test_tampered_checkpoint_byte(tmp_path):
    p = store.save_model(_tiny_denoiser(), tmp_path / "d.ckpt")
    data = bytearray(p.read_bytes())
    data[-100] ^= 0xFF
    p.write_bytes(bytes(data))
    with pytest.raises(IntegrityError, match="hash mismatch"):
        store.load_checkpoint(p)


def test_dataset_regeneration_is_bit_exact(tmp_path):
    pairs = make_pairs(6, "eval", seed=3)
    root = store.write_dataset(tmp_path / "ds", pairs, {"mode": "eval", "seed": 3})
    hq, lq, manifest = store.read_dataset(root)
    np.testing.assert_array_equal(hq, pairs.hq)
    np.testing.assert_array_equal(lq, pairs.lq)
    assert manifest["count"] == 6
    assert store.regenerate_lq(root) == []
    # a changed spec no longer reproduces the stored image
    doc = store.read_json(root / "manifest.json")
    doc["items"][0]["spec"]["seed"] += 1
    doc["items"][0]["spec"]["sigma"] = 20.0
    store.write_json(root / "manifest.json", doc)
    assert store.regenerate_lq(root) == ["00000.png"]


def test_dataset_file_tamper(tmp_path):
    root = store.write_dataset(tmp_path / "ds", make_pairs(2, "train", seed=0), {})
    img = store.load_png(root / "lq" / "00001.png")
    store.save_png(1 - img, root / "lq" / "00001.png")
    with pytest.raises(IntegrityError):
        store.read_dataset(root)


def test_empty_dataset(tmp_path):
    root = store.write_dataset(tmp_path / "ds", make_pairs(0, "eval", seed=0), {"mode": "eval"})
    hq, lq, manifest = store.read_dataset(root)
    assert manifest["count"] == 0 and len(hq) == 0


def test_config_roundtrip(tmp_path):
    cfg = ExperimentConfig(seed=5)
    cfg.sampler.N = 300
    p = save_config(cfg, tmp_path / "c.toml")
    assert load_config(p) == cfg
    assert "[sampler]" in dump_config(cfg)


@pytest.mark.parametrize("raw", [
    {"bogus": 1},
    {"schedule": {"T": 100, "beta_begin": 0.1}},
    {"sampler": {"N": 2000}},
    {"schedule": {"beta_start": 0.5, "beta_end": 0.1}},
    {"estimator": {"arch": "plain", "lr": 1}},
])
def test_config_rejects_bad_input(raw):
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


def test_derive_seed_is_stable_and_stage_specific():
    assert derive_seed(0, "a") == derive_seed(0, "a")
    assert derive_seed(0, "a") != derive_seed(0, "b")
    assert derive_seed(0, "a") != derive_seed(1, "a")
