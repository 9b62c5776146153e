"""Error-contraction diagnostics and sweeps over the starting timestep."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fid as fidmod
from .metrics import batch_psnr, batch_ssim
from .models.core import from_diffusion, to_diffusion
from .sampler import difface_restore, sample_xN, start_alpha, start_complement
from .schedule import chain_length, kappa


def kl_transition(e_norm_sq: float, N: int, schedule) -> float:
    """KL between ``N(sqrt(a) f, (1-a) I)`` and ``N(sqrt(a) x0, (1-a) I)``: ``kappa_N |e|^2 / 2``."""
    if e_norm_sq < 0:
        raise ValueError("squared error norm must be non-negative")
    return 0.5 * kappa(schedule, N) * float(e_norm_sq)


@dataclass
class ContractionReport:
    N: int
    alpha: float
    num_samples: int
    error_norm: float
    measured_shift: np.ndarray = field(repr=False)
    expected_shift: np.ndarray = field(repr=False)
    z_projection: float = 0.0  # along the error direction
    z_mean: float = 0.0        # of the element-averaged residual
    max_abs_shift: float = 0.0

    @property
    def agrees(self) -> bool:
        return abs(self.z_projection) <= 3.0 and abs(self.z_mean) <= 3.0


def contraction_report(x0, y0, estimator, N: int, schedule, num_samples: int = 10_000,
                       seed: int = 0, chunk: int = 1000) -> ContractionReport:
    """Monte-Carlo check that ``E[x_N] - sqrt(a_N) x0 = -sqrt(a_N) e``.

    ``x0`` and ``y0`` are single samples (no batch axis).  Standard errors use
    the known per-element noise scale ``sqrt(1 - a_N)``.
    """
    if num_samples < 1000:
        raise ValueError("num_samples must be at least 1000")
    x0 = np.asarray(x0, dtype=np.float64)
    y0 = np.asarray(y0, dtype=np.float64)
    a = start_alpha(schedule, N)
    e = x0 - np.asarray(estimator(y0[None]), dtype=np.float64)[0]
    rng = np.random.default_rng(seed)
    total = np.zeros_like(x0)
    done = 0
    while done < num_samples:
        n = min(chunk, num_samples - done)
        noise = rng.standard_normal((n,) + x0.shape)
        total += sample_xN(np.broadcast_to(y0, (n,) + y0.shape), N, estimator, schedule, noise).sum(axis=0)
        done += n
    shift = total / num_samples - math.sqrt(a) * x0
    expected = -math.sqrt(a) * e
    resid = shift - expected
    se = math.sqrt(start_complement(schedule, N) / num_samples)
    e_norm = float(np.linalg.norm(e))
    z_mean = float(resid.mean() / (se / math.sqrt(resid.size)))
    z_proj = float((resid * e).sum() / e_norm / se) if e_norm > 0 else z_mean
    return ContractionReport(N, a, num_samples, e_norm, shift, expected, z_proj, z_mean,
                             float(np.abs(shift).max()))


@dataclass
class MetricsReport:
    psnr: float
    ssim: float
    fid_proxy: float
    per_image: list = field(default_factory=list, repr=False)
    curves: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {"psnr": self.psnr, "ssim": self.ssim, "fid_proxy": self.fid_proxy,
                "per_image": self.per_image, "curves": self.curves}


def evaluate(outputs, targets, embedder=None) -> MetricsReport:
    """Metrics for canonical-range ``outputs`` against ``targets`` (both ``(B, H, W, C)``)."""
    p = batch_psnr(outputs, targets)
    s = batch_ssim(outputs, targets)
    embedder = embedder or fidmod.FeatureEmbedder(channels=np.asarray(outputs).shape[-1])
    if len(outputs) >= fidmod.min_set_size(embedder.dim):
        f = fidmod.fid_proxy(outputs, targets, embedder)
    else:
        f = math.nan
    per_image = [{"index": i, "psnr": float(a), "ssim": float(b)} for i, (a, b) in enumerate(zip(p, s))]
    return MetricsReport(float(np.mean(p)), float(np.mean(s)), f, per_image)


def diversity(samples) -> float:
    """Mean pairwise RMS distance between restorations of the same inputs."""
    samples = [np.asarray(s, dtype=np.float64) for s in samples]
    if len(samples) < 2:
        return 0.0
    axes = tuple(range(1, samples[0].ndim))
    d = [np.sqrt(((a - b) ** 2).mean(axis=axes)).mean() for a, b in itertools.combinations(samples, 2)]
    return float(np.mean(d))


SWEEP_FIELDS = ("N", "steps", "psnr", "ssim", "fid_proxy", "diversity")


def sweep_N(lq, hq, grid, estimator, denoiser, schedule, seeds=(0, 1), embedder=None,
            out: str | Path | None = None, progress=None) -> list[dict]:
    """Restore the test set at each starting timestep and average the metrics.

    ``lq`` and ``hq`` are canonical-range ``(B, H, W, C)`` arrays.  PSNR, SSIM
    and FID-proxy use the first seed; diversity compares all seeds.
    """
    y0 = to_diffusion(lq)
    rows = []
    for N in grid:
        outs = [from_diffusion(difface_restore(y0, int(N), estimator, denoiser, schedule, s)) for s in seeds]
        rep = evaluate(outs[0], hq, embedder)
        row = {"N": int(N), "steps": chain_length(schedule, int(N)), "psnr": rep.psnr, "ssim": rep.ssim,
               "fid_proxy": rep.fid_proxy, "diversity": diversity(outs)}
        rows.append(row)
        if progress is not None:
            progress(row)
    if out is not None:
        write_rows(out, rows, SWEEP_FIELDS)
    return rows


def write_rows(path, rows, fields) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields))
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in fields})
    return path


def read_rows(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [{k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)]
