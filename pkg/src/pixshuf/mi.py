"""Parzen-window mutual information between two single-channel images.

Each intensity ``v`` in [0, 1] is placed at bin coordinate ``t = v * (B - 1)``
and spread over the ``B`` bins with a Gaussian kernel that is truncated to the
histogram range and renormalised per pixel, so every pixel deposits exactly
unit mass. The joint table is the mean over pixels of the outer product of the
two images' kernel weights. All logarithms are natural (nats).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .image import Image


@dataclass(frozen=True)
class HistogramConfig:
    bins: int = 32
    bandwidth: float = 1.0  # Gaussian sigma, in bin units
    epsilon: float = 1e-12  # cells below this mass contribute nothing to the MI sum
    kernel: str = "gaussian"

    def __post_init__(self):
        if int(self.bins) != self.bins or self.bins < 2:
            raise ValueError(f"bins must be an integer >= 2, got {self.bins}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.kernel != "gaussian":
            raise ValueError(f"unsupported kernel {self.kernel!r}")


@dataclass(frozen=True, eq=False)
class JointHistogram:
    p_joint: np.ndarray  # (B, B); rows index image A, columns image B
    p_a: np.ndarray
    p_b: np.ndarray
    epsilon: float = 1e-12

    @property
    def bins(self) -> int:
        return self.p_joint.shape[0]


def _flat(x) -> np.ndarray:
    if isinstance(x, Image):
        if x.channels != 1:
            raise DimensionError(f"expected a single-channel image, got {x.channels} channels")
        return x.data.reshape(-1)
    return np.asarray(x, dtype=np.float64).reshape(-1)


def _pair(a, b):
    if isinstance(a, Image) and isinstance(b, Image):
        if (a.width, a.height) != (b.width, b.height):
            raise DimensionError(f"images differ in size: {a.width}x{a.height} vs {b.width}x{b.height}")
    fa, fb = _flat(a), _flat(b)
    if fa.shape != fb.shape:
        raise DimensionError(f"inputs hold {fa.size} and {fb.size} pixels")
    return fa, fb


def kernel_weights(values: np.ndarray, cfg: HistogramConfig, derivative: bool = False):
    """Per-pixel normalised kernel weights ``(N, B)``; optionally their d/dv as well."""
    bins = cfg.bins
    t = values * (bins - 1)
    d = np.arange(bins, dtype=np.float64)[None, :] - t[:, None]
    inv_var = 1.0 / (cfg.bandwidth * cfg.bandwidth)
    logw = -0.5 * d * d * inv_var
    # shift by the row max so a vanishing bandwidth still yields a one-hot row
    logw -= logw.max(axis=1, keepdims=True)
    g = np.exp(logw)
    w = g / g.sum(axis=1, keepdims=True)
    if not derivative:
        return w
    mean_d = np.einsum("ij,ij->i", w, d)
    dw = w * (d - mean_d[:, None]) * (inv_var * (bins - 1))
    return w, dw


def _histogram_from_weights(wa: np.ndarray, wb: np.ndarray, eps: float) -> JointHistogram:
    p = (wa.T @ wb) / wa.shape[0]
    return JointHistogram(p, p.sum(axis=1), p.sum(axis=0), eps)


def joint_histogram(a, b, cfg: HistogramConfig = HistogramConfig()) -> JointHistogram:
    fa, fb = _pair(a, b)
    return _histogram_from_weights(kernel_weights(fa, cfg), kernel_weights(fb, cfg), cfg.epsilon)


def mutual_information(h: JointHistogram) -> float:
    p = h.p_joint
    mask = p >= h.epsilon
    outer = np.outer(h.p_a, h.p_b)
    return float(np.sum(p[mask] * np.log(p[mask] / outer[mask])))


def entropy(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


class MIObjective:
    """MI against a fixed reference image, with the gradient w.r.t. the moving image.

    The reference's kernel weights are computed once, which is what makes the
    optimizer's inner loop cheap.
    """

    def __init__(self, reference, cfg: HistogramConfig = HistogramConfig()):
        self.cfg = cfg
        self.shape = np.shape(reference.data[:, :, 0] if isinstance(reference, Image) else reference)
        self._ref = _flat(reference)
        self._wa = kernel_weights(self._ref, cfg)

    def histogram(self, moving) -> JointHistogram:
        fb = _flat(moving)
        if fb.shape != self._ref.shape:
            raise DimensionError(f"moving image holds {fb.size} pixels, reference {self._ref.size}")
        return _histogram_from_weights(self._wa, kernel_weights(fb, self.cfg), self.cfg.epsilon)

    def value(self, moving) -> float:
        return mutual_information(self.histogram(moving))

    def value_and_grad(self, moving):
        """Return ``(mi, grad)`` where ``grad`` has the moving image's 2-D shape."""
        fb = _flat(moving)
        if fb.shape != self._ref.shape:
            raise DimensionError(f"moving image holds {fb.size} pixels, reference {self._ref.size}")
        wb, dwb = kernel_weights(fb, self.cfg, derivative=True)
        h = _histogram_from_weights(self._wa, wb, self.cfg.epsilon)
        p = h.p_joint
        mask = p >= h.epsilon
        log_ratio = np.zeros_like(p)
        log_ratio[mask] = np.log(p[mask] / np.broadcast_to(h.p_b, p.shape)[mask])
        # dI/db_i = sum_kl dp_kl/db_i * ln(p_kl / p_b(l)); dp_kl/db_i = wa_ik * dwb_il / N
        g = np.einsum("il,il->i", self._wa @ log_ratio, dwb) / fb.size
        mi = mutual_information(h)
        return mi, g.reshape(self.shape)


def mi_and_gradient(a, b, cfg: HistogramConfig = HistogramConfig()):
    """MI between ``a`` and ``b`` plus per-pixel dI/db."""
    _pair(a, b)
    return MIObjective(a, cfg).value_and_grad(b)


def mi_between(a, b, cfg: HistogramConfig = HistogramConfig()) -> float:
    return mutual_information(joint_histogram(a, b, cfg))
