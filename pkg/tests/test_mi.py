import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixshuf.errors import DimensionError
from pixshuf.fixtures import posterized, random_pair, smooth_noise
from pixshuf.gradcheck import brute_force_joint, check_mi_gradient, reference_mi
from pixshuf.image import Image
from pixshuf.mi import (
    HistogramConfig,
    JointHistogram,
    MIObjective,
    entropy,
    joint_histogram,
    mi_and_gradient,
    mi_between,
    mutual_information,
)


def test_config_validation():
    for bad in ({"bins": 1}, {"bandwidth": 0.0}, {"epsilon": 0.0}, {"kernel": "box"}):
        with pytest.raises(ValueError):
            HistogramConfig(**bad)


def test_histogram_matches_brute_force(rng):
    a, b = rng.random(40), rng.random(40)
    for bins, sigma in [(2, 0.5), (8, 1.0), (16, 0.3)]:
        h = joint_histogram(a, b, HistogramConfig(bins=bins, bandwidth=sigma))
        np.testing.assert_allclose(h.p_joint, brute_force_joint(a, b, bins, sigma), atol=1e-15)


def test_four_pixel_example_is_uniform():
    # Each pixel sits on a bin centre; the B=2 kernel gives weights (q, r) and (r, q)
    # with q + r = 1, so every cell collects (q + r)^2 / 4 = 1/4.
    a = np.array([0.0, 0.0, 1.0, 1.0])
    b = np.array([0.0, 1.0, 0.0, 1.0])
    h = joint_histogram(a, b, HistogramConfig(bins=2, bandwidth=0.5))
    np.testing.assert_allclose(h.p_joint, np.full((2, 2), 0.25), atol=1e-15)
    np.testing.assert_allclose(brute_force_joint(a, b, 2, 0.5), 0.25, atol=1e-15)


def test_constant_zero_image_mass_at_origin():
    z = Image(np.zeros((8, 8)))
    h = joint_histogram(z, z, HistogramConfig(bins=32, bandwidth=0.25))
    assert h.p_joint[0, 0] >= 0.99
    # at the default bandwidth the mass is still centred on (0, 0) but spreads:
    # w0 = 1 / sum_k exp(-k^2 / 2)
    h1 = joint_histogram(z, z, HistogramConfig(bins=32))
    w0 = 1.0 / math.fsum(math.exp(-(k**2) / 2) for k in range(32))
    assert np.unravel_index(h1.p_joint.argmax(), h1.p_joint.shape) == (0, 0)
    assert h1.p_joint[0, 0] == pytest.approx(w0 * w0, abs=1e-15)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_histogram_invariants(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random(50), rng.random(50)
    h = joint_histogram(a, b, HistogramConfig(bins=int(rng.integers(2, 33)), bandwidth=rng.uniform(0.1, 3)))
    assert abs(h.p_joint.sum() - 1) <= 1e-9
    assert np.all(h.p_joint >= 0)
    np.testing.assert_allclose(h.p_a, h.p_joint.sum(axis=1), atol=1e-12)
    np.testing.assert_allclose(h.p_b, h.p_joint.sum(axis=0), atol=1e-12)


def test_marginal_depends_only_on_first_image(rng):
    a, b, c = rng.random(100), rng.random(100), rng.random(100)
    cfg = HistogramConfig()
    np.testing.assert_allclose(joint_histogram(a, b, cfg).p_a, joint_histogram(a, c, cfg).p_a, atol=1e-12)


def test_dimension_errors():
    with pytest.raises(DimensionError):
        joint_histogram(Image(np.zeros((3, 3))), Image(np.zeros((3, 4))))
    with pytest.raises(DimensionError):
        joint_histogram(Image(np.zeros((3, 3, 3))), Image(np.zeros((3, 3, 3))))
    with pytest.raises(DimensionError):
        mi_and_gradient(np.zeros(4), np.zeros(5))


@pytest.mark.parametrize(
    "p, expected",
    [(np.full(32, 1 / 32), math.log(32)), (np.eye(1, 8)[0], 0.0), (np.array([0.5, 0.5]), math.log(2))],
)
def test_entropy(p, expected):
    assert entropy(p) == pytest.approx(expected, abs=1e-12)


def test_independent_product_has_zero_mi(rng):
    pa = rng.random(16)
    pa /= pa.sum()
    pb = rng.random(16)
    pb /= pb.sum()
    h = JointHistogram(np.outer(pa, pb), pa, pb)
    assert abs(mutual_information(h)) <= 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_self_information_equals_entropy_on_bin_aligned_images(seed):
    x = posterized(32, 32, seed, sigma=[0, 1, 2, 3][seed % 4])
    cfg = HistogramConfig(bins=32, bandwidth=0.25)
    h = joint_histogram(x, x, cfg)
    assert mutual_information(h) == pytest.approx(entropy(h.p_a), abs=0.02)
    # the independent H(A) + H(B) - H(A,B) route agrees exactly at the same bandwidth
    assert mutual_information(h) == pytest.approx(float(reference_mi(x.data, x.data, 32, 0.25)), abs=1e-9)


def test_self_information_gap_shrinks_with_bandwidth():
    # continuous intensities split kernel mass between neighbouring bins, so the
    # I(X;X) = H(X) identity only emerges as the bandwidth goes to zero
    x = smooth_noise(64, 0)
    gaps = []
    for sigma in (0.25, 0.1, 0.05, 0.02):
        h = joint_histogram(x, x, HistogramConfig(bandwidth=sigma))
        gaps.append(entropy(h.p_a) - mutual_information(h))
    assert all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.02


def test_mi_properties_on_random_pairs():
    rng = np.random.default_rng(99)
    cfg = HistogramConfig(bins=16)
    for _ in range(1000):
        n = int(rng.integers(4, 65))
        a = rng.random(n) ** rng.uniform(0.3, 3)
        b = rng.random(n) if rng.random() < 0.5 else np.clip(a + rng.normal(0, 0.1, n), 0, 1)
        h = joint_histogram(a, b, cfg)
        mi = mutual_information(h)
        assert mi >= -1e-12
        assert mi <= min(entropy(h.p_a), entropy(h.p_b)) + 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_mi_symmetry(seed):
    a, b = random_pair(16, seed)
    assert abs(mi_between(a, b) - mi_between(b, a)) <= 1e-9


def test_permutation_of_sites_leaves_mi_unchanged(rng):
    a = smooth_noise(32, 1).data.ravel()
    b = smooth_noise(32, 2).data.ravel()
    perm = rng.permutation(a.size)
    cfg = HistogramConfig()
    # same pixel pairs, different accumulation order: equal up to summation rounding
    assert mi_between(a[perm], b[perm], cfg) == pytest.approx(mi_between(a, b, cfg), abs=1e-14)


def test_objective_matches_functional_api(rng):
    a, b = rng.random((12, 12)), rng.random((12, 12))
    cfg = HistogramConfig(bins=8)
    obj = MIObjective(a, cfg)
    mi, g = obj.value_and_grad(b)
    mi2, g2 = mi_and_gradient(a, b, cfg)
    assert mi == mi2 == pytest.approx(mi_between(a, b, cfg), abs=1e-15)
    np.testing.assert_array_equal(g, g2)
    assert g.shape == (12, 12)


def test_constant_pair_has_zero_gradient():
    a = np.full((8, 8), 0.4)
    b = np.full((8, 8), 0.7)
    mi, g = mi_and_gradient(a, b)
    assert abs(mi) <= 1e-12
    assert np.max(np.abs(g)) <= 1e-9


@pytest.mark.parametrize("bins", [8, 16, 32])
def test_gradient_matches_finite_differences(bins):
    assert check_mi_gradient(size=16, bins=(bins,), pairs=3, seed=bins) <= 1e-4


def test_gradient_with_degenerate_bandwidth_is_finite(rng):
    a, b = rng.random((8, 8)), rng.random((8, 8))
    mi, g = mi_and_gradient(a, b, HistogramConfig(bandwidth=1e-9))
    assert np.isfinite(mi) and np.all(np.isfinite(g))


@pytest.mark.parametrize("bins", [8, 16, 32])
def test_moving_toward_reference_never_decreases_mi(bins):
    """From b = a + noise, the direction (a - b) has a non-negative MI derivative."""
    rng = np.random.default_rng(bins)
    cfg = HistogramConfig(bins=bins)
    eps = 1e-5
    for _ in range(100):
        a = rng.random(256)
        b = np.clip(a + rng.normal(0, rng.choice([0.01, 0.05, 0.1, 0.3]), 256), 0, 1)
        d = a - b
        fd = (mi_between(a, b + eps * d, cfg) - mi_between(a, b - eps * d, cfg)) / (2 * eps)
        _, g = mi_and_gradient(a, b, cfg)
        assert fd >= -1e-9
        assert float(g.ravel() @ d) == pytest.approx(fd, rel=1e-4, abs=1e-9)
