"""Deterministic synthetic images used by the tests, the acceptance suite and ``gradcheck``.

``landscape_photo`` and ``brushstroke_painting`` generate the bundled 256x256
content/style pair (``tests/data/photo.png`` and ``tests/data/painting.png``);
regenerate them with ``python -m pixshuf.fixtures tests/data``.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import ImageDraw
from scipy.ndimage import gaussian_filter

from .image import Image, save_image
from .warp import DisplacementField, warp


def smooth_noise(size: int = 64, seed: int = 0, sigma: float = 3.0, channels: int = 1) -> Image:
    """Gaussian-blurred uniform noise stretched to [0, 1] per channel."""
    rng = np.random.default_rng(seed)
    planes = []
    for _ in range(channels):
        x = gaussian_filter(rng.random((size, size)), sigma)
        planes.append((x - x.min()) / (x.max() - x.min()))
    return Image(np.stack(planes, axis=-1))


def shifted(img: Image, dx: float, dy: float) -> Image:
    """Translate content by ``(+dx, +dy)`` px: ``out(x, y) = img(x - dx, y - dy)``, edge-clamped."""
    return warp(img, DisplacementField.constant(img.width, img.height, -dx, -dy))


def random_pair(size: int, seed: int):
    """Two independent uniform-noise single-channel images."""
    rng = np.random.default_rng(seed)
    return Image(rng.random((size, size))), Image(rng.random((size, size)))


def posterized(size: int, levels: int, seed: int, sigma: float = 0.0) -> Image:
    """Single-channel image whose intensities sit exactly on ``k / (levels - 1)``."""
    rng = np.random.default_rng(seed)
    x = rng.random((size, size))
    if sigma > 0:
        x = gaussian_filter(x, sigma)
        x = (x - x.min()) / (x.max() - x.min())
    return Image(np.round(x * (levels - 1)) / (levels - 1))


def landscape_photo(size: int = 256, seed: int = 1) -> Image:
    """A photo-like scene: sky, sun, two mountain ridges, a lake and a house."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.zeros((size, size, 3))
    sky_top, sky_bottom = np.array([0.25, 0.45, 0.80]), np.array([0.80, 0.85, 0.95])
    img[:] = sky_top + (sky_bottom - sky_top) * ys[..., None]

    sun = (xs - 0.72) ** 2 + (ys - 0.2) ** 2 < 0.07**2
    img[sun] = [1.0, 0.93, 0.6]

    far = 0.45 + 0.06 * np.sin(7 * xs + 0.5) + 0.03 * np.sin(19 * xs + 1.3)
    near = 0.58 + 0.08 * np.sin(4 * xs + 2.0) + 0.02 * np.sin(23 * xs)
    img[ys > far] = [0.45, 0.50, 0.62]
    img[ys > near] = [0.22, 0.38, 0.20]

    lake = (ys > 0.72) & ((xs - 0.35) ** 2 / 0.3**2 + (ys - 0.84) ** 2 / 0.1**2 < 1)
    img[lake] = [0.20, 0.35, 0.60]

    hx0, hx1, hy0, hy1 = 0.68, 0.86, 0.68, 0.84
    house = (xs > hx0) & (xs < hx1) & (ys > hy0) & (ys < hy1)
    img[house] = [0.85, 0.78, 0.65]
    roof = (ys <= hy0) & (ys > hy0 - 0.09 + np.abs(xs - (hx0 + hx1) / 2) * 0.9) & (xs > hx0 - 0.02) & (xs < hx1 + 0.02)
    img[roof] = [0.60, 0.15, 0.12]
    door = (xs > 0.75) & (xs < 0.79) & (ys > 0.76) & (ys < hy1)
    img[door] = [0.30, 0.20, 0.12]

    grain = gaussian_filter(rng.normal(0, 1, (size, size)), 1.2)
    img += 0.03 * grain[..., None]
    img = gaussian_filter(img, sigma=(0.7, 0.7, 0))
    return Image(np.clip(img, 0, 1))


PAINTING_PALETTE = np.array(
    [
        [0.09, 0.13, 0.36],
        [0.16, 0.28, 0.58],
        [0.30, 0.48, 0.75],
        [0.55, 0.70, 0.86],
        [0.93, 0.83, 0.32],
        [0.98, 0.93, 0.62],
        [0.80, 0.45, 0.15],
        [0.15, 0.35, 0.25],
    ]
)


def brushstroke_painting(size: int = 256, seed: int = 7, strokes: int = 5000) -> Image:
    """A painting-like image: short strokes from a fixed palette following a swirl field."""
    rng = np.random.default_rng(seed)
    base = (PAINTING_PALETTE[1] * 255).astype(np.uint8)
    canvas = PILImage.new("RGB", (size, size), tuple(int(v) for v in base))
    draw = ImageDraw.Draw(canvas)
    centers = rng.random((3, 2)) * size
    for _ in range(strokes):
        x, y = rng.random(2) * size
        # swirl direction from the nearest vortex, plus jitter
        cx, cy = centers[np.argmin(np.hypot(centers[:, 0] - x, centers[:, 1] - y))]
        angle = np.arctan2(y - cy, x - cx) + np.pi / 2 + rng.normal(0, 0.3)
        length = rng.uniform(4, 14) * size / 256
        r = np.hypot(x - cx, y - cy) / size
        # palette index drifts with distance to the vortex so colors form bands
        k = int(np.clip(r * 10 + rng.normal(0, 0.8), 0, len(PAINTING_PALETTE) - 1))
        color = np.clip(PAINTING_PALETTE[k] + rng.normal(0, 0.03, 3), 0, 1)
        x2, y2 = x + length * np.cos(angle), y + length * np.sin(angle)
        width = max(1, int(round(rng.uniform(2, 4) * size / 256)))
        draw.line([(x, y), (x2, y2)], fill=tuple(int(v * 255) for v in color), width=width)
    return Image(np.asarray(canvas, dtype=np.float64) / 255.0)


def write_bundled(directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_image(landscape_photo(), d / "photo.png")
    save_image(brushstroke_painting(), d / "painting.png")


if __name__ == "__main__":
    write_bundled(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
