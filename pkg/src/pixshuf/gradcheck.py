"""Finite-difference oracles for the analytic derivatives.

The MI oracle does not reuse :mod:`pixshuf.mi`: it rebuilds the soft joint
histogram from scratch and evaluates MI as ``H(A) + H(B) - H(A, B)``, then
differentiates that numerically one pixel at a time. It runs in extended
precision: in float64 the entropy cancellation alone leaves ~1e-10 of noise in
each difference quotient, which swamps pixels whose gradient is ~1e-6.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .image import Image
from .mi import HistogramConfig, mi_and_gradient
from .optimizer import smoothness_penalty
from .warp import DisplacementField, warp, warp_input_gradient

MI_TOL = 1e-4
WARP_TOL = 1e-5
SMOOTH_TOL = 1e-6
GRAD_FLOOR = 1e-8
# the kernel must span this many finite-difference steps (in bin units) to be checkable
MIN_KERNEL_STEPS = 10


def max_relative_error(analytic, numeric, floor: float = GRAD_FLOOR) -> float:
    """Largest ``|a - n| / max(|a|, |n|)`` over entries where either side exceeds ``floor``."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(np.abs(a), np.abs(n))
    keep = scale > floor
    if not np.any(keep):
        return 0.0
    return float(np.max(np.abs(a[keep] - n[keep]) / scale[keep]))


def central_difference(f, x, eps: float) -> np.ndarray:
    """Gradient of scalar ``f`` at flat vector ``x`` by central differences, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64).ravel()
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g


def _soft_weights(values, bins, sigma):
    t = np.asarray(values, dtype=np.longdouble) * (bins - 1)
    sq = (np.arange(bins, dtype=np.longdouble)[None, :] - t[:, None]) ** 2
    sq -= sq.min(axis=1, keepdims=True)
    k = np.exp(-sq / (2 * np.longdouble(sigma) ** 2))
    return k / k.sum(axis=1, keepdims=True)


def _entropy(p):
    p = p[p > 0]
    return -np.sum(p * np.log(p))


def reference_mi(a, b, bins: int, sigma: float, epsilon: float = 1e-12) -> float:
    """MI as H(A) + H(B) - H(A, B) of the soft joint histogram (cells below ``epsilon`` dropped)."""
    wa = _soft_weights(np.ravel(a), bins, sigma)
    wb = _soft_weights(np.ravel(b), bins, sigma)
    joint = (wa.T @ wb) / wa.shape[0]
    joint = np.where(joint >= epsilon, joint, 0)
    return _entropy(joint.sum(axis=1)) + _entropy(joint.sum(axis=0)) - _entropy(joint)


class _OnePixelMI:
    """Reference MI of ``(a, b)`` with a single pixel of ``b`` replaced.

    Only that pixel's kernel row changes, so the joint table is patched with
    one outer product instead of being rebuilt.
    """

    def __init__(self, a, b, bins, sigma, epsilon):
        self.bins, self.sigma, self.epsilon = bins, sigma, epsilon
        self.wa = _soft_weights(np.ravel(a), bins, sigma)
        self.wb = _soft_weights(np.ravel(b), bins, sigma)
        self.n = self.wa.shape[0]
        self.joint = (self.wa.T @ self.wb) / self.n

    def __call__(self, i, value):
        row = _soft_weights([value], self.bins, self.sigma)[0]
        joint = self.joint + np.outer(self.wa[i], row - self.wb[i]) / self.n
        joint = np.where(joint >= self.epsilon, joint, 0)
        return _entropy(joint.sum(axis=1)) + _entropy(joint.sum(axis=0)) - _entropy(joint)


def brute_force_joint(a, b, bins: int, sigma: float) -> np.ndarray:
    """Joint histogram accumulated pixel by pixel with scalar math."""
    a = [float(v) for v in np.ravel(a)]
    b = [float(v) for v in np.ravel(b)]
    joint = [[0.0] * bins for _ in range(bins)]

    def weights(v):
        t = v * (bins - 1)
        raw = [math.exp(-((k - t) ** 2) / (2 * sigma * sigma)) for k in range(bins)]
        z = math.fsum(raw)
        return [r / z for r in raw]

    for va, vb in zip(a, b):
        wa, wb = weights(va), weights(vb)
        for k, l in itertools.product(range(bins), range(bins)):
            joint[k][l] += wa[k] * wb[l]
    return np.array(joint) / len(a)


def check_mi_gradient(size=16, bins=(8, 16, 32), sigma=1.0, pairs=20, seed=0, eps=1e-5) -> float:
    """Worst relative error of the MI gradient against the extended-precision oracle.

    A kernel narrower than a few finite-difference steps degenerates into hard
    binning: the analytic gradient vanishes while the difference quotient only
    sees bin-edge jumps. Such configurations cannot be verified and score 1.0.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for b_count in bins:
        cfg = HistogramConfig(bins=b_count, bandwidth=sigma)
        if sigma < MIN_KERNEL_STEPS * eps * (b_count - 1):
            worst = 1.0
            continue
        for _ in range(pairs):
            a = rng.random((size, size))
            b = rng.random((size, size))
            _, grad = mi_and_gradient(a, b, cfg)
            ref = _OnePixelMI(a, b, b_count, sigma, cfg.epsilon)
            flat = b.ravel()
            numeric = np.array(
                [(ref(i, v + eps) - ref(i, v - eps)) / (2 * eps) for i, v in enumerate(flat)], dtype=np.float64
            )
            worst = max(worst, max_relative_error(grad, numeric))
    return worst


def check_warp_jacobian(size=16, seed=0, eps=1e-4, knot_tol=1e-3, max_shift=2.0) -> float:
    """Compare warp_input_gradient with central differences on a random RGB image and field.

    Samples that are clamped or lie within ``knot_tol`` of an integer coordinate
    are skipped, since the bilinear slope is discontinuous there.
    """
    rng = np.random.default_rng(seed)
    src = Image(rng.random((size, size, 3)))
    dx = rng.uniform(-max_shift, max_shift, (size, size))
    dy = rng.uniform(-max_shift, max_shift, (size, size))
    gx, gy = warp_input_gradient(src, DisplacementField(dx, dy))
    ys, xs = np.mgrid[0:size, 0:size]
    rx, ry = xs + dx, ys + dy

    def near_knot(r):
        return np.abs(r - np.round(r)) < knot_tol

    margin = knot_tol
    inside = (rx > margin) & (rx < size - 1 - margin) & (ry > margin) & (ry < size - 1 - margin)
    keep = inside & ~near_knot(rx) & ~near_knot(ry)

    # each output pixel depends only on its own offset, so all pixels can be perturbed at once
    fd_x = (warp(src, DisplacementField(dx + eps, dy)).data - warp(src, DisplacementField(dx - eps, dy)).data) / (2 * eps)
    fd_y = (warp(src, DisplacementField(dx, dy + eps)).data - warp(src, DisplacementField(dx, dy - eps)).data) / (2 * eps)
    return max(max_relative_error(gx[keep], fd_x[keep]), max_relative_error(gy[keep], fd_y[keep]))


def check_smoothness_gradient(size=8, seed=0, weight=1.0, eps=1e-5) -> float:
    rng = np.random.default_rng(seed)
    dx = rng.normal(0, 1, (size, size))
    dy = rng.normal(0, 1, (size, size))
    _, (gdx, gdy) = smoothness_penalty(DisplacementField(dx, dy), weight)

    def f(v):
        u = v.reshape(2, size, size)
        return smoothness_penalty(DisplacementField(u[0], u[1]), weight)[0]

    numeric = central_difference(f, np.concatenate([dx.ravel(), dy.ravel()]), eps)
    return max_relative_error(np.concatenate([gdx.ravel(), gdy.ravel()]), numeric)


def run_gradcheck(size=16, bins=None, sigma=1.0, seed=0, pairs=20) -> dict:
    """Run all three oracles; returns a JSON-ready dict with a ``passed`` flag."""
    bins = (8, 16, 32) if bins is None else tuple(bins)
    errs = {
        "mi_grad_max_rel_err": check_mi_gradient(size, bins, sigma, pairs, seed),
        "warp_jacobian_max_rel_err": check_warp_jacobian(size, seed),
        "smoothness_grad_max_rel_err": check_smoothness_gradient(8, seed),
    }
    tols = {
        "mi_grad_max_rel_err": MI_TOL,
        "warp_jacobian_max_rel_err": WARP_TOL,
        "smoothness_grad_max_rel_err": SMOOTH_TOL,
    }
    passed = all(np.isfinite(v) and v <= tols[k] for k, v in errs.items())
    return {**errs, "thresholds": tols, "passed": bool(passed)}
