"""Desk-scale evaluation metrics.

``ssim_luma`` scores content preservation (higher is better) and
``color_hist_chi2`` scores how close two images' color distributions are
(lower is better). Neither needs a pretrained network.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError
from .image import Image, to_luma

SSIM_WINDOW = 8
SSIM_STRIDE = 4
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
HIST_BINS = 32


def ssim_luma(a: Image, b: Image) -> float:
    """Mean SSIM over 8x8 windows at stride 4, on Rec. 601 luma."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionError(f"ssim needs equal sizes: {a.width}x{a.height} vs {b.width}x{b.height}")
    x = to_luma(a).plane()
    y = to_luma(b).plane()
    wy, wx = min(SSIM_WINDOW, x.shape[0]), min(SSIM_WINDOW, x.shape[1])
    xs = sliding_window_view(x, (wy, wx))[::SSIM_STRIDE, ::SSIM_STRIDE]
    ys = sliding_window_view(y, (wy, wx))[::SSIM_STRIDE, ::SSIM_STRIDE]
    mx = xs.mean(axis=(-2, -1))
    my = ys.mean(axis=(-2, -1))
    vx = ((xs - mx[..., None, None]) ** 2).mean(axis=(-2, -1))
    vy = ((ys - my[..., None, None]) ** 2).mean(axis=(-2, -1))
    cov = ((xs - mx[..., None, None]) * (ys - my[..., None, None])).mean(axis=(-2, -1))
    num = (2 * mx * my + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
    return float(np.mean(num / den))


def _rgb(img: Image) -> np.ndarray:
    return img.data if img.channels == 3 else np.repeat(img.data, 3, axis=2)


def channel_histograms(img: Image, bins: int = HIST_BINS) -> np.ndarray:
    """``(3, bins)`` hard histograms over [0, 1], each summing to 1."""
    data = _rgb(img).reshape(-1, 3)
    idx = np.minimum((data * bins).astype(np.intp), bins - 1)
    hist = np.stack([np.bincount(idx[:, c], minlength=bins) for c in range(3)]).astype(np.float64)
    return hist / data.shape[0]


def color_hist_chi2(a: Image, b: Image) -> float:
    """Chi-squared distance between per-channel 32-bin color histograms; in [0, 6]."""
    p = channel_histograms(a)
    q = channel_histograms(b)
    return float(np.sum((p - q) ** 2 / (p + q + 1e-12)))
