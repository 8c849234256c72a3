"""Image quality metrics: Stokes RMSE, PSNR, DoLP PSNR, AoLP error, SSIM."""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError, ShapeMismatchError
from .images import GrayImage, RgbImage, StokesImage
from .stokes import aolp, dolp, rgb_to_gray


def rmse(a: StokesImage, b: StokesImage, channels: str = "all") -> float:
    """Root-mean-square error over selected Stokes channels.

    channels: "all" for s0, s1, s2 or "s12_only" for the two
    polarization-difference channels.
    """
    if a.s0.shape != b.s0.shape:
        raise ShapeMismatchError("stokes images disagree on shape")
    if channels == "all":
        da = a.stack() - b.stack()
    elif channels == "s12_only":
        da = np.stack([a.s1 - b.s1, a.s2 - b.s2])
    else:
        raise ParameterError(f"unknown channel selection {channels!r}")
    return float(np.sqrt(np.mean(da * da)))


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give +inf."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError("psnr inputs disagree on shape")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def rgb_psnr(a: RgbImage, b: RgbImage, peak: float = 1.0) -> float:
    return psnr(a.stack(), b.stack(), peak)


def dolp_psnr(pred: StokesImage, gt: StokesImage) -> float:
    """PSNR between DoLP maps, both clamped to [0, 1] before comparison."""
    da = np.clip(dolp(pred).y, 0.0, 1.0)
    db = np.clip(dolp(gt).y, 0.0, 1.0)
    return psnr(da, db, peak=1.0)


def aolp_error(
    pred: StokesImage, gt: StokesImage, dolp_gate: float | None = None
) -> float:
    """Mean angular AoLP difference in degrees, folded into [0, 90].

    With dolp_gate set, only pixels whose ground-truth DoLP exceeds the
    gate contribute; an empty gate selection returns 0.
    """
    a = aolp(pred).y
    b = aolp(gt).y
    d = np.abs(a - b)
    d = np.minimum(d, 180.0 - d)
    if dolp_gate is not None:
        keep = dolp(gt).y > dolp_gate
        if not keep.any():
            return 0.0
        d = d[keep]
    return float(np.mean(d))


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def _window_means(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid-mode 2-d correlation with the given kernel."""
    k = kernel.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(plane, (k, k))
    return np.einsum("hwij,ij->hw", win, kernel, optimize=True)


def ssim(a: RgbImage, b: RgbImage) -> float:
    """Mean SSIM over valid window positions of the grayscale projections.

    11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1.
    """
    if a.r.shape != b.r.shape:
        raise ShapeMismatchError("ssim inputs disagree on shape")
    x = rgb_to_gray(a).y
    y = rgb_to_gray(b).y
    win = 11
    if x.shape[0] < win or x.shape[1] < win:
        raise ParameterError(f"image smaller than the {win}x{win} SSIM window")
    kernel = _gaussian_kernel(win, 1.5)
    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2

    mu_x = _window_means(x, kernel)
    mu_y = _window_means(y, kernel)
    xx = _window_means(x * x, kernel) - mu_x * mu_x
    yy = _window_means(y * y, kernel) - mu_y * mu_y
    xy = _window_means(x * y, kernel) - mu_x * mu_y

    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))
