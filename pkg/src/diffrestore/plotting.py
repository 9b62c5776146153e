"""Static figures written next to the CSV outputs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_schedule_curves(t, alpha_cum, kappa, path):
    """``alpha_N`` and ``kappa_N`` against the starting timestep (log scale for kappa)."""
    fig, ax1 = plt.subplots(figsize=(5, 3.5))
    ax1.plot(t, alpha_cum, color="tab:blue", label=r"$\alpha_N$")
    ax1.set_xlabel("starting timestep N")
    ax1.set_ylabel(r"$\alpha_N$", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.semilogy(t, kappa, color="tab:red", label=r"$\kappa_N$")
    ax2.set_ylabel(r"$\kappa_N$", color="tab:red")
    return _finish(fig, path)


def plot_sweep(rows, path, metrics=("psnr", "fid_proxy", "diversity")):
    N = [r["N"] for r in rows]
    fig, axes = plt.subplots(1, len(metrics), figsize=(3.2 * len(metrics), 3))
    for ax, m in zip(np.atleast_1d(axes), metrics):
        ax.plot(N, [r[m] for r in rows], marker="o")
        ax.set_xlabel("N")
        ax.set_title(m)
    return _finish(fig, path)


def plot_probe(rows, path):
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.plot([r["N"] for r in rows], [r["rmse"] for r in rows], marker="o")
    ax.set_xlabel("N")
    ax.set_ylabel("reconstruction RMSE")
    return _finish(fig, path)


def image_grid(images, path, ncols=8):
    images = np.asarray(images)
    n = len(images)
    nrows = max(1, -(-n // ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(ncols, nrows), squeeze=False)
    for ax in axes.flat:
        ax.axis("off")
    for ax, img in zip(axes.flat, images):
        ax.imshow(np.clip(img.squeeze(), 0, 1), cmap="gray" if img.shape[-1] == 1 else None)
    return _finish(fig, path)
