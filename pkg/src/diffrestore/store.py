"""Persistence with content hashes: schedules, checkpoints, datasets, manifests.

Layouts::

    runs/<id>/{config.toml, manifest.json, outputs/, checkpoints/}
    datasets/<name>/{hq/, lq/, manifest.json}

JSON documents carry a ``sha256`` field over their canonical encoding without
that field.  Checkpoints are one JSON header line followed by a torch
payload; the header records the payload hash.
"""
from __future__ import annotations

import hashlib
import io
import json
import os
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import IntegrityError, InputError
from .schedule import NoiseSchedule

CHECKPOINT_MAGIC = b"DRCKPT1\n"
RUNS_ENV = "DIFFRESTORE_RUNS"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def _canonical(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=True).encode()


def write_json(path, doc: dict) -> Path:
    """Write ``doc`` with an embedded content hash."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {k: v for k, v in doc.items() if k != "sha256"}
    body["sha256"] = sha256_bytes(_canonical(body))
    path.write_text(json.dumps(body, indent=2, sort_keys=True))
    return path


def read_json(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"{path}: unreadable JSON ({exc})") from exc
    recorded = doc.pop("sha256", None)
    actual = sha256_bytes(_canonical(doc))
    if recorded != actual:
        raise IntegrityError(f"{path}: hash mismatch (recorded {recorded}, actual {actual})")
    return doc


# schedules

def save_schedule(schedule: NoiseSchedule, path) -> Path:
    # float.hex keeps the round trip bit-exact
    return write_json(path, {"kind": "schedule", "betas": [float(b).hex() for b in schedule.betas],
                             "fingerprint": schedule.fingerprint})


def load_schedule(path) -> NoiseSchedule:
    doc = read_json(path)
    if doc.get("kind") != "schedule":
        raise InputError(f"{path} is not a schedule file")
    sched = NoiseSchedule(np.array([float.fromhex(b) for b in doc["betas"]]))
    if sched.fingerprint != doc["fingerprint"]:
        raise IntegrityError(f"{path}: schedule fingerprint mismatch")
    return sched


# checkpoints

def save_checkpoint(state: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    torch.save(state, buf)
    payload = buf.getvalue()
    header = {"kind": state.get("kind"), "arch": state.get("arch"),
              "schedule_fingerprint": state.get("schedule_fingerprint"),
              "payload_sha256": sha256_bytes(payload), "payload_size": len(payload)}
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)
    return path


def read_checkpoint_header(path) -> dict:
    with Path(path).open("rb") as fh:
        if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise IntegrityError(f"{path}: not a checkpoint file")
        try:
            return json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise IntegrityError(f"{path}: corrupt checkpoint header") from exc


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"checkpoint {path} does not exist")
    header = read_checkpoint_header(path)
    with path.open("rb") as fh:
        fh.read(len(CHECKPOINT_MAGIC))
        fh.readline()
        payload = fh.read()
    actual = sha256_bytes(payload)
    if actual != header.get("payload_sha256"):
        raise IntegrityError(f"{path}: payload hash mismatch (recorded {header.get('payload_sha256')}, "
                             f"actual {actual})")
    state = torch.load(io.BytesIO(payload), weights_only=False)
    if state.get("schedule_fingerprint") != header.get("schedule_fingerprint"):
        raise IntegrityError(f"{path}: header and payload disagree on the schedule fingerprint")
    return state


def save_model(model, path) -> Path:
    return save_checkpoint(model.state(), path)


def load_model(path, cls):
    return cls.from_state(load_checkpoint(path))


# images and datasets

def save_png(x: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    u8 = np.clip(np.round(np.asarray(x) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(u8[..., 0] if u8.ndim == 3 and u8.shape[-1] == 1 else u8).save(path)
    return path


def load_png(path) -> np.ndarray:
    try:
        a = np.asarray(Image.open(path), dtype=np.float64) / 255.0
    except OSError as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    return a[..., None] if a.ndim == 2 else a[..., :3]


def load_images(path) -> tuple[np.ndarray, list[str]]:
    """A single PNG or every PNG in a directory, stacked ``(B, H, W, C)``."""
    path = Path(path)
    files = sorted(path.glob("*.png")) if path.is_dir() else [path]
    if not files or not files[0].exists():
        raise InputError(f"no PNG images at {path}")
    return np.stack([load_png(f) for f in files]), [f.name for f in files]


def write_dataset(root, pairs, meta: dict) -> Path:
    """Write ``hq/`` and ``lq/`` PNGs plus a manifest with per-item spec and file hashes."""
    root = Path(root)
    items = []
    for i, (hq, lq, spec) in enumerate(zip(pairs.hq, pairs.lq, pairs.specs)):
        name = f"{i:05d}.png"
        save_png(hq, root / "hq" / name)
        save_png(lq, root / "lq" / name)
        items.append({"name": name, "spec": spec.to_dict(),
                      "hq_sha256": sha256_file(root / "hq" / name),
                      "lq_sha256": sha256_file(root / "lq" / name)})
    (root / "hq").mkdir(parents=True, exist_ok=True)
    (root / "lq").mkdir(parents=True, exist_ok=True)
    write_json(root / "manifest.json", {"kind": "dataset", **meta, "count": len(items), "items": items})
    return root


def read_dataset(root, verify: bool = True):
    """Load a dataset directory; returns ``(hq, lq, manifest)``."""
    root = Path(root)
    if not (root / "manifest.json").exists():
        raise InputError(f"{root} has no manifest.json")
    manifest = read_json(root / "manifest.json")
    hq, lq = [], []
    for item in manifest["items"]:
        for sub, bucket in (("hq", hq), ("lq", lq)):
            f = root / sub / item["name"]
            if verify and sha256_file(f) != item[f"{sub}_sha256"]:
                raise IntegrityError(f"{f}: hash mismatch")
            bucket.append(load_png(f))
    empty = np.zeros((0, 0, 0, 3))
    return (np.stack(hq) if hq else empty), (np.stack(lq) if lq else empty), manifest


def regenerate_lq(root) -> list[str]:
    """Re-run each recorded degradation on the stored HQ image; returns names that differ."""
    from .degradation import DegradationSpec, degrade
    from .experiment import quantize

    root = Path(root)
    manifest = read_json(root / "manifest.json")
    bad = []
    for item in manifest["items"]:
        hq = load_png(root / "hq" / item["name"])
        lq = quantize(degrade(hq, DegradationSpec.from_dict(item["spec"])))
        if not np.array_equal(lq, load_png(root / "lq" / item["name"])):
            bad.append(item["name"])
    return bad


def default_runs_dir() -> Path:
    return Path(os.environ.get(RUNS_ENV, "runs"))
