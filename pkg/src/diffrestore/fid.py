"""Frechet distance between Gaussian fits of image features.

Without a pretrained network the features come from a frozen, seeded random
two-layer conv embedding followed by global average pooling.  Values are
only comparable between runs sharing the same embedder.
"""
from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .errors import InputError


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric square root; negative eigenvalues from sampling noise are clipped to 0."""
    m = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(m)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_distance(mu1, cov1, mu2, cov2) -> float:
    mu1, mu2 = np.asarray(mu1, dtype=np.float64), np.asarray(mu2, dtype=np.float64)
    cov1, cov2 = np.atleast_2d(cov1).astype(np.float64), np.atleast_2d(cov2).astype(np.float64)
    s1 = sqrtm_psd(cov1)
    inner = s1 @ cov2 @ s1
    cross = np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (inner + inner.T)), 0.0, None)).sum()
    diff = mu1 - mu2
    return float(max(diff @ diff + np.trace(cov1) + np.trace(cov2) - 2.0 * cross, 0.0))


def gaussian_fit(features: np.ndarray):
    f = np.asarray(features, dtype=np.float64)
    return f.mean(axis=0), np.cov(f, rowvar=False)


def frechet_from_features(fa, fb) -> float:
    return frechet_distance(*gaussian_fit(fa), *gaussian_fit(fb))


class FeatureEmbedder:
    """Random conv(3x3) -> ReLU -> conv(3x3, stride 2) -> ReLU -> global average pool."""

    def __init__(self, channels: int = 3, dim: int = 64, hidden: int = 32, seed: int = 0):
        self.dim = dim
        rng = np.random.default_rng(seed)
        w1 = rng.standard_normal((hidden, channels, 3, 3)) / np.sqrt(channels * 9)
        w2 = rng.standard_normal((dim, hidden, 3, 3)) / np.sqrt(hidden * 9)
        self.w1 = torch.from_numpy(w1).float()
        self.b1 = torch.from_numpy(rng.normal(0, 0.1, hidden)).float()
        self.w2 = torch.from_numpy(w2).float()
        self.b2 = torch.from_numpy(rng.normal(0, 0.1, dim)).float()

    def __call__(self, images: np.ndarray, chunk: int = 512) -> np.ndarray:
        """``images``: ``(B, H, W, C)`` in ``[0, 1]``; returns ``(B, dim)``."""
        images = np.asarray(images)
        out = []
        with torch.no_grad():
            for i in range(0, images.shape[0], chunk):
                x = torch.from_numpy(np.moveaxis(images[i:i + chunk], -1, 1).astype(np.float32)) * 2 - 1
                h = F.relu(F.conv2d(x, self.w1, self.b1, padding=1))
                h = F.relu(F.conv2d(h, self.w2, self.b2, stride=2, padding=1))
                out.append(h.mean(dim=(2, 3)).double().numpy())
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.dim))


def min_set_size(dim: int) -> int:
    return max(dim + 1, 50)


def fid_proxy(set_a, set_b, embedder: FeatureEmbedder | None = None) -> float:
    embedder = embedder or FeatureEmbedder(channels=np.asarray(set_a).shape[-1])
    need = min_set_size(embedder.dim)
    if len(set_a) < need or len(set_b) < need:
        raise InputError(f"each set needs at least {need} images, got {len(set_a)} and {len(set_b)}")
    return frechet_from_features(embedder(set_a), embedder(set_b))
