"""Synthetic LQ image generation: blur, bicubic downscale, noise, JPEG, upscale.

Images are float arrays of shape ``(H, W, C)`` with values in ``[0, 1]``.
"""
from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import InputError, ParameterError

EVAL_SETS = {
    "s": (4, 8, 16, 24, 32, 36, 40),
    "sigma": (1, 5, 10, 15, 20),
    "q": (30, 40, 50, 60, 70),
    "l": (2, 4, 6, 8, 10, 12, 14),
    "theta": (0.0, 0.25 * math.pi, 0.5 * math.pi, 0.75 * math.pi),
}
TRAIN_RANGES = {"l": (0.1, 15.0), "s": (0.8, 32.0), "sigma": (0.0, 20.0), "q": (30.0, 100.0)}


@dataclass(frozen=True, eq=False)
class BlurKernel:
    l_x: float
    l_y: float
    theta: float
    support: int
    weights: np.ndarray = field(repr=False)

    @property
    def covariance(self) -> np.ndarray:
        return kernel_covariance(self.l_x, self.l_y, self.theta)

    @classmethod
    def delta(cls) -> "BlurKernel":
        """The one-hot kernel, i.e. the ``l -> 0`` limit."""
        return cls(0.0, 0.0, 0.0, 1, np.ones((1, 1)))

    def empirical_covariance(self) -> np.ndarray:
        r = self.support // 2
        yy, xx = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
        w = self.weights
        mx, my = (w * xx).sum(), (w * yy).sum()
        cxx = (w * (xx - mx) ** 2).sum()
        cyy = (w * (yy - my) ** 2).sum()
        cxy = (w * (xx - mx) * (yy - my)).sum()
        return np.array([[cxx, cxy], [cxy, cyy]])


def kernel_covariance(l_x, l_y, theta) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    U = np.array([[c, -s], [s, c]])
    return U @ np.diag([l_x ** 2, l_y ** 2]) @ U.T


def default_support(l_x, l_y, image_size=None) -> int:
    """Smallest odd integer >= 8*max(l)+1, capped to fit inside the image."""
    k = math.ceil(8 * max(l_x, l_y) + 1)
    k += 1 - k % 2
    if image_size is not None:
        cap = image_size if image_size % 2 else image_size - 1
        k = min(k, max(cap, 1))
    return k


def make_kernel(l_x: float, l_y: float, theta: float, support: int | None = None) -> BlurKernel:
    """Anisotropic Gaussian on an integer grid with covariance ``U diag(l_x^2, l_y^2) U^T``.

    Grid coordinates are (x, y) = (column, row) offsets from the center.
    """
    if l_x <= 0 or l_y <= 0:
        raise ParameterError(f"kernel widths must be positive, got {l_x}, {l_y}")
    if support is None:
        support = default_support(l_x, l_y)
    if int(support) != support or support < 1 or support % 2 == 0:
        raise ParameterError(f"kernel support must be a positive odd integer, got {support}")
    support = int(support)
    inv = np.linalg.inv(kernel_covariance(l_x, l_y, theta))
    r = support // 2
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    quad = inv[0, 0] * xx * xx + (inv[0, 1] + inv[1, 0]) * xx * yy + inv[1, 1] * yy * yy
    w = np.exp(-0.5 * quad)
    w /= w.sum()
    return BlurKernel(float(l_x), float(l_y), float(theta), support, w)


@dataclass(frozen=True)
class DegradationSpec:
    """Parameters of one degradation draw; ``q=None`` skips JPEG entirely."""

    l_x: float
    l_y: float
    theta: float
    s: float
    sigma: float
    q: int | None
    seed: int
    support: int | None = None

    def __post_init__(self):
        # training draws go down to s=0.8, so only positivity is enforced
        if self.s <= 0:
            raise ParameterError(f"scale must be positive, got {self.s}")
        if self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if self.q is not None and not 1 <= int(self.q) <= 100:
            raise ParameterError(f"JPEG quality must be in [1, 100], got {self.q}")
        if self.l_x < 0 or self.l_y < 0:
            raise ParameterError("kernel widths must be non-negative")

    @classmethod
    def identity(cls, seed=0) -> "DegradationSpec":
        return cls(0.0, 0.0, 0.0, 1.0, 0.0, None, seed)

    def kernel(self, image_size=None) -> BlurKernel:
        if self.l_x == 0 and self.l_y == 0:
            return BlurKernel.delta()
        support = self.support or default_support(self.l_x, self.l_y, image_size)
        return make_kernel(max(self.l_x, 1e-6), max(self.l_y, 1e-6), self.theta, support)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationSpec":
        return cls(**d)


@dataclass(frozen=True)
class DegradationRanges:
    """Sampling domain for :func:`sample_spec`.

    ``mode="train"`` draws uniformly from continuous intervals (isotropic
    kernels, ``l_x = l_y = l``); ``mode="eval"`` draws uniformly from the
    discrete evaluation sets.
    """

    mode: str = "train"
    l: tuple = TRAIN_RANGES["l"]
    s: tuple = TRAIN_RANGES["s"]
    sigma: tuple = TRAIN_RANGES["sigma"]
    q: tuple = TRAIN_RANGES["q"]
    theta: tuple = (0.0,)

    def __post_init__(self):
        if self.mode not in ("train", "eval"):
            raise ParameterError(f"unknown degradation mode {self.mode!r}")
        for name in ("l", "s", "sigma", "q", "theta"):
            if len(getattr(self, name)) == 0:
                raise ParameterError(f"empty range for {name}")

    @classmethod
    def train(cls) -> "DegradationRanges":
        return cls()

    @classmethod
    def evaluation(cls) -> "DegradationRanges":
        return cls("eval", EVAL_SETS["l"], EVAL_SETS["s"], EVAL_SETS["sigma"], EVAL_SETS["q"],
                   EVAL_SETS["theta"])

    @classmethod
    def for_mode(cls, mode: str) -> "DegradationRanges":
        if mode == "train":
            return cls.train()
        if mode == "eval":
            return cls.evaluation()
        raise ParameterError(f"unknown degradation mode {mode!r}")


def sample_spec(ranges: DegradationRanges, rng: np.random.Generator) -> DegradationSpec:
    seed = int(rng.integers(0, 2**31 - 1))
    if ranges.mode == "eval":
        pick = lambda vals: vals[int(rng.integers(len(vals)))]
        return DegradationSpec(
            l_x=float(pick(ranges.l)), l_y=float(pick(ranges.l)), theta=float(pick(ranges.theta)),
            s=float(pick(ranges.s)), sigma=float(pick(ranges.sigma)), q=int(pick(ranges.q)),
            seed=seed,
        )
    l = float(rng.uniform(*ranges.l))
    return DegradationSpec(
        l_x=l, l_y=l, theta=0.0,
        s=float(rng.uniform(*ranges.s)), sigma=float(rng.uniform(*ranges.sigma)),
        q=int(round(rng.uniform(*ranges.q))), seed=seed,
    )


def blur(x: np.ndarray, kernel: BlurKernel) -> np.ndarray:
    if kernel.support == 1:
        return x * kernel.weights[0, 0]
    # ndimage.convolve flips the kernel; weights are point-symmetric so this is exact
    return np.stack([ndimage.convolve(x[..., c], kernel.weights, mode="reflect")
                     for c in range(x.shape[-1])], axis=-1)


def bicubic_resize(x: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Per-channel bicubic resize (antialiased when shrinking), ``size=(H, W)``."""
    h, w = size
    if (h, w) == x.shape[:2]:
        return x.copy()
    out = [np.asarray(Image.fromarray(np.ascontiguousarray(x[..., c], dtype=np.float32), mode="F")
                      .resize((w, h), Image.BICUBIC), dtype=np.float64)
           for c in range(x.shape[-1])]
    return np.stack(out, axis=-1)


def jpeg_roundtrip(x: np.ndarray, quality: int) -> np.ndarray:
    u8 = np.clip(np.round(x * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(u8[..., 0] if u8.shape[-1] == 1 else u8)
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    out = np.asarray(Image.open(buf), dtype=np.float64) / 255.0
    return out.reshape(x.shape)


def degrade(x: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """Apply the full blur-to-JPEG chain of ``spec`` and resize back to the input size."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[..., None]
    if x.ndim != 3:
        raise InputError(f"expected an (H, W, C) image, got shape {x.shape}")
    h, w = x.shape[:2]
    kernel = spec.kernel(min(h, w))
    if kernel.support > min(h, w):
        raise InputError(f"image {h}x{w} is smaller than kernel support {kernel.support}")
    rng = np.random.default_rng(spec.seed)

    y = blur(x, kernel)
    small = (max(1, round(h / spec.s)), max(1, round(w / spec.s)))
    y = bicubic_resize(y, small)
    if spec.sigma > 0:
        y = y + rng.normal(0.0, spec.sigma / 255.0, size=y.shape)
        y = np.clip(y, 0.0, 1.0)
    if spec.q is not None:
        y = jpeg_roundtrip(np.clip(y, 0.0, 1.0), spec.q)
    y = bicubic_resize(y, (h, w))
    return np.clip(y, 0.0, 1.0)
