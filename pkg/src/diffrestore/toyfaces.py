"""Procedural 'toy face' images used as the HQ distribution at desk scale.

Each face is a skin ellipse under a hair blob, with simple features drawn
on top over a shaded background.  Shapes are rendered at 4x and box-filtered
down, so edges are antialiased.
"""
from __future__ import annotations

import numpy as np

SUPERSAMPLE = 4

_SKIN = np.array([[0.96, 0.80, 0.69], [0.87, 0.67, 0.52], [0.76, 0.57, 0.42],
                  [0.55, 0.38, 0.26], [0.40, 0.27, 0.18]])
_HAIR = np.array([[0.08, 0.06, 0.05], [0.30, 0.18, 0.08], [0.62, 0.45, 0.20],
                  [0.55, 0.20, 0.08], [0.70, 0.70, 0.68]])
_IRIS = np.array([[0.25, 0.45, 0.75], [0.35, 0.22, 0.10], [0.30, 0.55, 0.35]])


def _ellipse(xx, yy, cx, cy, rx, ry, angle=0.0):
    c, s = np.cos(angle), np.sin(angle)
    dx, dy = xx - cx, yy - cy
    u = (c * dx + s * dy) / rx
    v = (-s * dx + c * dy) / ry
    return u * u + v * v <= 1.0


def _paint(img, mask, color):
    img[mask] = color


def render_face(rng: np.random.Generator, size: int = 32) -> np.ndarray:
    """Draw one face; returns ``(size, size, 3)`` floats in ``[0, 1]``."""
    n = size * SUPERSAMPLE
    yy, xx = (np.mgrid[0:n, 0:n] + 0.5) / n  # unit square coordinates

    top = rng.uniform(0.2, 0.9, 3)
    bottom = np.clip(top + rng.normal(0, 0.15, 3), 0, 1)
    img = top + (bottom - top) * yy[..., None]

    cx = 0.5 + rng.normal(0, 0.03)
    cy = 0.53 + rng.normal(0, 0.03)
    fw = rng.uniform(0.24, 0.30)
    fh = fw * rng.uniform(1.15, 1.35)
    tilt = rng.normal(0, 0.08)

    skin = np.clip(_SKIN[rng.integers(len(_SKIN))] + rng.normal(0, 0.03, 3), 0, 1)
    hair = np.clip(_HAIR[rng.integers(len(_HAIR))] + rng.normal(0, 0.03, 3), 0, 1)

    hair_h = fh * rng.uniform(1.0, 1.25)
    _paint(img, _ellipse(xx, yy, cx, cy - 0.08, fw * rng.uniform(1.1, 1.3), hair_h, tilt), hair)
    _paint(img, (yy > cy + 0.1) & (np.abs(xx - cx) < fw * 0.45), skin * 0.9)  # neck
    _paint(img, _ellipse(xx, yy, cx, cy, fw, fh, tilt), skin)
    fringe = rng.uniform(0.35, 0.75)
    _paint(img, _ellipse(xx, yy, cx, cy - fh * 0.95, fw * 1.05, fh * fringe, tilt), hair)

    c, s = np.cos(tilt), np.sin(tilt)

    def at(u, v):
        return cx + c * u - s * v, cy + s * u + c * v

    eye_dx = fw * rng.uniform(0.38, 0.48)
    eye_y = -fh * rng.uniform(0.05, 0.18)
    eye_r = fw * rng.uniform(0.14, 0.19)
    iris = _IRIS[rng.integers(len(_IRIS))]
    look = rng.normal(0, 0.25, 2) * eye_r
    brow = np.clip(hair * 0.8, 0, 1)
    for side in (-1, 1):
        ex, ey = at(side * eye_dx, eye_y)
        _paint(img, _ellipse(xx, yy, ex, ey, eye_r * 1.3, eye_r * 0.8, tilt), np.array([0.97, 0.97, 0.95]))
        _paint(img, _ellipse(xx, yy, ex + look[0], ey + look[1] * 0.5, eye_r * 0.6, eye_r * 0.6), iris)
        _paint(img, _ellipse(xx, yy, ex + look[0], ey + look[1] * 0.5, eye_r * 0.28, eye_r * 0.28), np.zeros(3))
        bx, by = at(side * eye_dx, eye_y - eye_r * rng.uniform(1.6, 2.1))
        _paint(img, _ellipse(xx, yy, bx, by, eye_r * 1.5, eye_r * 0.35, tilt + side * rng.normal(0, 0.15)), brow)

    nx, ny = at(0.0, fh * 0.2)
    _paint(img, _ellipse(xx, yy, nx, ny, fw * 0.09, fh * 0.05, tilt), skin * 0.75)

    mx, my = at(rng.normal(0, 0.01), fh * rng.uniform(0.45, 0.58))
    mw = fw * rng.uniform(0.3, 0.5)
    mh = fh * rng.uniform(0.04, 0.12)
    lips = np.clip(np.array([0.75, 0.25, 0.3]) * rng.uniform(0.7, 1.1), 0, 1)
    _paint(img, _ellipse(xx, yy, mx, my, mw, mh, tilt), lips)

    img = img.reshape(size, SUPERSAMPLE, size, SUPERSAMPLE, 3).mean(axis=(1, 3))
    return np.clip(img, 0.0, 1.0)


def render_faces(count: int, seed: int, size: int = 32) -> np.ndarray:
    """Batch of faces; face ``i`` depends only on ``(seed, i)``."""
    out = np.empty((count, size, size, 3))
    for i in range(count):
        out[i] = render_face(np.random.default_rng([seed, i]), size)
    return out
