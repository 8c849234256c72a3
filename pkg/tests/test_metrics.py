import math

import numpy as np
import pytest

from conftest import random_rgb, random_valid_stokes
from polarsim import metrics
from polarsim.errors import ParameterError, ShapeMismatchError
from polarsim.images import RgbImage, StokesImage
from polarsim.stokes import rgb_to_gray


def naive_ssim(a: RgbImage, b: RgbImage) -> float:
    """Loop-based SSIM reference (11x11 Gaussian window, sigma 1.5)."""
    x = rgb_to_gray(a).y
    y = rgb_to_gray(b).y
    size, sigma = 11, 1.5
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2 * sigma**2))
    k = np.outer(g, g)
    k /= k.sum()
    c1, c2 = 0.01**2, 0.03**2
    h, w = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            wx = x[i : i + size, j : j + size]
            wy = y[i : i + size, j : j + size]
            mx = float((k * wx).sum())
            my = float((k * wy).sum())
            vx = float((k * wx * wx).sum()) - mx * mx
            vy = float((k * wy * wy).sum()) - my * my
            vxy = float((k * wx * wy).sum()) - mx * my
            vals.append(
                ((2 * mx * my + c1) * (2 * vxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


def _const_stokes(s0, s1, s2, shape=(8, 8)):
    return StokesImage(
        np.full(shape, float(s0)), np.full(shape, float(s1)), np.full(shape, float(s2))
    )


def test_rmse_channels():
    a = _const_stokes(1.0, 0.0, 0.0)
    b = _const_stokes(0.0, 0.0, 0.0)
    assert metrics.rmse(a, b, "all") == pytest.approx(math.sqrt(1.0 / 3.0))
    assert metrics.rmse(a, b, "s12_only") == 0.0
    with pytest.raises(ParameterError):
        metrics.rmse(a, b, "s1_only")
    with pytest.raises(ShapeMismatchError):
        metrics.rmse(a, _const_stokes(0, 0, 0, shape=(4, 4)))


def test_psnr_values():
    a = np.zeros((8, 8))
    assert metrics.psnr(a, a) == math.inf
    b = np.full((8, 8), 0.1)
    assert metrics.psnr(a, b) == pytest.approx(20.0)  # mse 0.01, peak 1


def test_dolp_psnr_clamps():
    # non-physical prediction (DoLP 2) clamps to 1 before comparison
    pred = _const_stokes(0.5, 1.0, 0.0)
    gt = _const_stokes(1.0, 1.0, 0.0)
    assert metrics.dolp_psnr(pred, gt) == math.inf


def test_aolp_error_folding():
    pred = _const_stokes(1.0, np.cos(np.radians(2 * 179.0)), np.sin(np.radians(2 * 179.0)))
    gt = _const_stokes(1.0, np.cos(np.radians(2 * 1.0)), np.sin(np.radians(2 * 1.0)))
    assert metrics.aolp_error(pred, gt) == pytest.approx(2.0, abs=1e-9)


def test_aolp_error_gate():
    pred = _const_stokes(1.0, 0.3, 0.0)
    gt = _const_stokes(1.0, 0.0, 0.1)  # gt DoLP 0.1, gt angle 45
    gated = metrics.aolp_error(pred, gt, dolp_gate=0.5)
    assert gated == 0.0  # nothing passes the gate
    assert metrics.aolp_error(pred, gt) == pytest.approx(45.0)


def test_ssim_identity(rng):
    img = random_rgb(rng, 16, 16)
    assert metrics.ssim(img, img) == pytest.approx(1.0)


def test_ssim_matches_naive(rng):
    a = random_rgb(rng, 16, 16)
    b = random_rgb(rng, 16, 16)
    assert abs(metrics.ssim(a, b) - naive_ssim(a, b)) < 1e-8


def test_ssim_degrades_with_noise(rng):
    a = random_rgb(rng, 32, 32)
    noisy = RgbImage(*(np.clip(a.stack() + rng.normal(0, 0.1, (3, 32, 32)), 0, 1)))
    assert metrics.ssim(a, noisy) < metrics.ssim(a, a)


def test_ssim_too_small(rng):
    a = random_rgb(rng, 8, 8)
    with pytest.raises(ParameterError):
        metrics.ssim(a, a)


def test_rgb_psnr(rng):
    a = random_rgb(rng, 8, 8)
    assert metrics.rgb_psnr(a, a) == math.inf
