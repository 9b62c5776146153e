"""Full-reference image metrics on canonical ``[0, 1]`` images ``(H, W[, C])``."""
from __future__ import annotations

import math

import numpy as np
from scipy.signal import correlate2d

from .errors import ShapeError

LUMA = np.array([0.299, 0.587, 0.114])
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range ** 2 / mse)


def luminance(x: np.ndarray) -> np.ndarray:
    if x.ndim == 3 and x.shape[-1] == 3:
        return x @ LUMA
    if x.ndim == 3 and x.shape[-1] == 1:
        return x[..., 0]
    if x.ndim == 2:
        return x
    raise ShapeError(f"expected an (H, W[, C]) image, got shape {x.shape}")


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian windows of the luminance."""
    a, b = _pair(a, b)
    x, y = luminance(a), luminance(b)
    w = gaussian_window(min(SSIM_WINDOW, *x.shape))
    filt = lambda z: correlate2d(z, w, mode="valid")
    mu_x, mu_y = filt(x), filt(y)
    sxx = filt(x * x) - mu_x ** 2
    syy = filt(y * y) - mu_y ** 2
    sxy = filt(x * y) - mu_x * mu_y
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def batch_psnr(a, b, data_range=1.0) -> np.ndarray:
    a, b = _pair(a, b)
    return np.array([psnr(x, y, data_range) for x, y in zip(a, b)])


def batch_ssim(a, b, data_range=1.0) -> np.ndarray:
    a, b = _pair(a, b)
    return np.array([ssim(x, y, data_range) for x, y in zip(a, b)])
