"""Small convolutional networks for 32x32 toy images (NCHW tensors)."""
from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=torch.float32) / half)
    args = t.float()[:, None] * freqs[None]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=1)


class ResBlock(nn.Module):
    def __init__(self, cin, cout, temb_dim, groups=8):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, cin)
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.temb = nn.Linear(temb_dim, cout)
        self.norm2 = nn.GroupNorm(groups, cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.skip = nn.Conv2d(cin, cout, 1) if cin != cout else nn.Identity()

    def forward(self, x, emb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb(emb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class TinyUNet(nn.Module):
    """Two-level UNet predicting the noise in ``x_t``; 32 -> 16 -> 8 and back."""

    def __init__(self, channels=3, width=32):
        super().__init__()
        self.width = width
        temb = width * 4
        self.embed = nn.Sequential(nn.Linear(width, temb), nn.SiLU(), nn.Linear(temb, temb))
        self.stem = nn.Conv2d(channels, width, 3, padding=1)
        self.enc1 = ResBlock(width, width, temb)
        self.down1 = nn.Conv2d(width, width, 3, stride=2, padding=1)
        self.enc2 = ResBlock(width, 2 * width, temb)
        self.down2 = nn.Conv2d(2 * width, 2 * width, 3, stride=2, padding=1)
        self.mid = ResBlock(2 * width, 2 * width, temb)
        self.dec2 = ResBlock(4 * width, 2 * width, temb)
        self.dec1 = ResBlock(3 * width, width, temb)
        self.head = nn.Sequential(nn.GroupNorm(8, width), nn.SiLU(), nn.Conv2d(width, channels, 3, padding=1))

    def forward(self, x, t):
        emb = self.embed(timestep_embedding(t, self.width))
        h1 = self.enc1(self.stem(x), emb)
        h2 = self.enc2(self.down1(h1), emb)
        h = self.mid(self.down2(h2), emb)
        h = self.dec2(torch.cat([F.interpolate(h, scale_factor=2.0), h2], 1), emb)
        h = self.dec1(torch.cat([F.interpolate(h, scale_factor=2.0), h1], 1), emb)
        return self.head(h)


class PlainConvNet(nn.Module):
    """SRCNN-style estimator: pixel-unshuffle, a plain stack of 5x5 convs, pixel-shuffle."""

    def __init__(self, channels=3, width=64, depth=5):
        super().__init__()
        layers = [nn.PixelUnshuffle(2), nn.Conv2d(4 * channels, width, 5, padding=2), nn.ReLU(inplace=True)]
        for _ in range(depth - 2):
            layers += [nn.Conv2d(width, width, 5, padding=2), nn.ReLU(inplace=True)]
        layers += [nn.Conv2d(width, 4 * channels, 5, padding=2), nn.PixelShuffle(2)]
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        return self.body(x)


class _Residual(nn.Module):
    def __init__(self, width):
        super().__init__()
        self.conv1 = nn.Conv2d(width, width, 3, padding=1)
        self.conv2 = nn.Conv2d(width, width, 3, padding=1)

    def forward(self, x):
        return x + self.conv2(F.leaky_relu(self.conv1(x), 0.2))


class ResidualNet(nn.Module):
    """Stronger estimator: two unshuffle stages, residual blocks, global skip."""

    def __init__(self, channels=3, width=64, blocks=6):
        super().__init__()
        self.head = nn.Sequential(
            nn.PixelUnshuffle(2), nn.Conv2d(4 * channels, width // 4, 3, padding=1), nn.LeakyReLU(0.2),
            nn.PixelUnshuffle(2), nn.Conv2d(width, width, 3, padding=1),
        )
        self.body = nn.Sequential(*[_Residual(width) for _ in range(blocks)])
        self.tail = nn.Sequential(
            nn.Conv2d(width, 4 * width, 3, padding=1), nn.PixelShuffle(2), nn.LeakyReLU(0.2),
            nn.Conv2d(width, 4 * channels, 3, padding=1), nn.PixelShuffle(2),
        )

    def forward(self, x):
        return x + self.tail(self.body(self.head(x)))


class MLPDenoiser(nn.Module):
    """Noise predictor for low-dimensional vectors ``(B, d)``."""

    def __init__(self, dim=2, width=128, depth=3):
        super().__init__()
        self.width = width
        self.embed = nn.Sequential(nn.Linear(width, width), nn.SiLU())
        self.inp = nn.Linear(dim, width)
        self.hidden = nn.ModuleList([nn.Linear(width, width) for _ in range(depth)])
        self.out = nn.Linear(width, dim)

    def forward(self, x, t):
        emb = self.embed(timestep_embedding(t, self.width))
        h = self.inp(x)
        for layer in self.hidden:
            h = h + layer(F.silu(h + emb))
        return self.out(F.silu(h))


ARCHITECTURES = {
    "mlp": MLPDenoiser,
    "unet": TinyUNet,
    "plain": PlainConvNet,
    "residual": ResidualNet,
}


def build(arch: str, **kwargs) -> nn.Module:
    try:
        cls = ARCHITECTURES[arch]
    except KeyError:
        raise ValueError(f"unknown architecture {arch!r}; choose from {sorted(ARCHITECTURES)}") from None
    return cls(**kwargs)
