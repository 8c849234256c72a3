"""Raw-frame processing: demosaic, sparse Stokes pooling, binning.

The demosaicer is a deliberately simple, deterministic baseline:
channel-wise normalized convolution with a Gaussian spatial kernel,
followed by a second guided pass whose weights also penalize luma
differences (edge-aware). Border handling is reflect-101 everywhere.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError, ShapeMismatchError
from .images import FourAngleImage, PixelMask, RgbImage, StokesImage
from .sensor import (
    B,
    CLUSTER_OFFSETS,
    G,
    P0,
    P45,
    P90,
    P135,
    R,
    RawFrame,
    tile_side_for_ratio,
)
from .stokes import GRAY_WEIGHTS, stokes_from_four_angles

_ANGLE_CODES = (P0, P45, P90, P135)


def _shift(a: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """a sampled at (y+dy, x+dx) with reflect-101 borders."""
    r = max(abs(dy), abs(dx))
    if r == 0:
        return a
    p = np.pad(a, r, mode="reflect")
    h, w = a.shape
    return p[r + dy : r + dy + h, r + dx : r + dx + w]


def _normalized_fill(
    values: np.ndarray,
    sites: np.ndarray,
    radius: int,
    sigma_s: float,
    guide: np.ndarray | None = None,
    sigma_r: float = 0.1,
) -> np.ndarray:
    """Fill holes by weighted averaging of nearby sample sites.

    Weights are Gaussian in distance and, when a guide plane is given,
    Gaussian in guide-value difference. Sampled sites pass through
    unchanged. Pixels with no site in reach fall back to iterative 3x3
    averaging of already-filled neighbors.
    """
    sitesf = sites.astype(np.float64)
    acc = np.zeros_like(values, dtype=np.float64)
    wacc = np.zeros_like(values, dtype=np.float64)
    inv2ss = 1.0 / (2.0 * sigma_s * sigma_s)
    inv2sr = 1.0 / (2.0 * sigma_r * sigma_r)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            w = np.exp(-(dy * dy + dx * dx) * inv2ss)
            sw = _shift(sitesf, dy, dx) * w
            if guide is not None:
                diff = guide - _shift(guide, dy, dx)
                sw = sw * np.exp(-diff * diff * inv2sr)
            acc += sw * _shift(values, dy, dx)
            wacc += sw
    out = np.where(wacc > 0, acc / np.where(wacc > 0, wacc, 1.0), 0.0)
    out[sites] = values[sites]

    filled = (wacc > 0) | sites
    guard = 0
    while not filled.all():
        f = filled.astype(np.float64)
        num = np.zeros_like(out)
        den = np.zeros_like(out)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                num += _shift(out * f, dy, dx)
                den += _shift(f, dy, dx)
        nxt = den > 0
        hole = ~filled & nxt
        out[hole] = (num[hole] / den[hole])
        filled |= nxt
        guard += 1
        if guard > max(values.shape):
            raise ParameterError("no sample sites to fill from")
    return out


def demosaic_sparse(raw: RawFrame) -> tuple[RgbImage, FourAngleImage, PixelMask]:
    """Split a sparse-sensor frame into RGB, sparse four-angle planes, mask.

    RGB is reconstructed at full resolution, treating polarization sites
    as missing for every color channel. The four-angle planes carry raw
    values at the matching polarization sites and zeros elsewhere.
    """
    if raw.layout.kind != "sparse":
        raise ShapeMismatchError("demosaic_sparse expects a sparse-layout frame")
    grid = raw.layout.class_grid
    v = raw.values

    # at high polarization ratios a whole color can be shadowed by the
    # clusters (r=1/4 covers every red cell); estimate it from the others
    sites_of = {code: grid == code for code in (R, G, B)}
    present = [code for code in (R, G, B) if sites_of[code].any()]
    if not present:
        raise ParameterError("layout has no regular color pixels to demosaic")

    def fill_all(guide=None):
        filled = {
            code: _normalized_fill(
                v, sites_of[code], radius=4, sigma_s=1.5, guide=guide, sigma_r=0.1
            )
            for code in present
        }
        if len(present) < 3:
            proxy = sum(filled.values()) / len(filled)
            for code in (R, G, B):
                filled.setdefault(code, proxy)
        return [filled[code] for code in (R, G, B)]

    # first pass: plain normalized convolution, to get a luma guide
    plain = fill_all()
    wr, wg, wb = GRAY_WEIGHTS
    luma = wr * plain[0] + wg * plain[1] + wb * plain[2]
    rgb = RgbImage(*fill_all(guide=luma))

    planes = [np.where(grid == code, v, 0.0) for code in _ANGLE_CODES]
    four = FourAngleImage(*planes, density="sparse")
    mask = PixelMask(raw.layout.pol_mask)
    return rgb, four, mask


def pooled_sparse_stokes(
    four: FourAngleImage, layout
) -> tuple[StokesImage, PixelMask]:
    """Combine each 2x2 polarization cluster into one Stokes sample.

    The four angles of a cluster are treated as co-located; the resulting
    camera-referred Stokes values are written at all four cluster pixels,
    zeros elsewhere. The returned mask marks cluster pixels.
    """
    if layout.kind != "sparse":
        raise ShapeMismatchError("pooled_sparse_stokes expects a sparse layout")
    side = tile_side_for_ratio(layout.ratio)
    plane_of = {P0: four.l0, P45: four.l45, P90: four.l90, P135: four.l135}
    v = {
        cls: plane_of[cls][dy::side, dx::side]
        for (dy, dx), cls in CLUSTER_OFFSETS.items()
    }
    s0 = (v[P0] + v[P45] + v[P90] + v[P135]) / 4.0
    s1 = (v[P0] - v[P90]) / 2.0
    s2 = (v[P45] - v[P135]) / 2.0

    out = [np.zeros((four.height, four.width)) for _ in range(3)]
    for plane, tiled in zip(out, (s0, s1, s2)):
        for dy, dx in CLUSTER_OFFSETS:
            plane[dy::side, dx::side] = tiled
    return StokesImage(*out), PixelMask(layout.pol_mask)


def _bayer_demosaic(mosaic: np.ndarray, colors: np.ndarray) -> RgbImage:
    """Bilinear-style fill of an RGGB Bayer mosaic (any resolution)."""
    planes = [
        _normalized_fill(mosaic, colors == code, radius=2, sigma_s=1.0)
        for code in (R, G, B)
    ]
    return RgbImage(*planes)


def bin_conventional(raw: RawFrame) -> tuple[RgbImage, FourAngleImage]:
    """Conventional-sensor outputs at half resolution per axis.

    Each 2x2 same-color cell holds the four polarizer angles; averaging
    them yields the unpolarized value of that color site (a Bayer mosaic
    at half resolution, demosaiced here), and reading them individually
    yields a dense four-angle image at the same half resolution.
    """
    if raw.layout.kind != "conventional":
        raise ShapeMismatchError("bin_conventional expects a conventional-layout frame")
    h, w = raw.values.shape
    if h % 4 or w % 4:
        raise ParameterError("conventional binning needs dimensions divisible by 4")

    angle_planes = {}
    for (dy, dx), cls in CLUSTER_OFFSETS.items():
        angle_planes[cls] = raw.values[dy::2, dx::2]
    four = FourAngleImage(*[angle_planes[c] for c in _ANGLE_CODES], density="dense")

    unpol = (four.l0 + four.l45 + four.l90 + four.l135) / 4.0
    yy, xx = np.mgrid[0 : h // 2, 0 : w // 2]
    cell = np.empty((h // 2, w // 2), dtype=np.uint8)
    cell[(yy % 2 == 0) & (xx % 2 == 0)] = R
    cell[(yy % 2 == 0) & (xx % 2 == 1)] = G
    cell[(yy % 2 == 1) & (xx % 2 == 0)] = G
    cell[(yy % 2 == 1) & (xx % 2 == 1)] = B
    rgb = _bayer_demosaic(unpol, cell)
    return rgb, four


def conventional_gray_stokes(raw: RawFrame) -> StokesImage:
    """Half-resolution gray-projected Stokes planes from a conventional frame.

    Each half-resolution angle plane is a color mosaic; it is demosaiced
    and gray-projected before applying the Stokes analysis transform, so
    the result is comparable against gray scene ground truth.
    """
    _, four = bin_conventional(raw)
    h2, w2 = four.height, four.width
    yy, xx = np.mgrid[0:h2, 0:w2]
    cell = np.empty((h2, w2), dtype=np.uint8)
    cell[(yy % 2 == 0) & (xx % 2 == 0)] = R
    cell[(yy % 2 == 0) & (xx % 2 == 1)] = G
    cell[(yy % 2 == 1) & (xx % 2 == 0)] = G
    cell[(yy % 2 == 1) & (xx % 2 == 1)] = B
    wr, wg, wb = GRAY_WEIGHTS
    gray_planes = []
    for plane in (four.l0, four.l45, four.l90, four.l135):
        rgb = _bayer_demosaic(plane, cell)
        gray_planes.append(wr * rgb.r + wg * rgb.g + wb * rgb.b)
    return stokes_from_four_angles(FourAngleImage(*gray_planes))


def upsample_bilinear(plane: np.ndarray, factor: int) -> np.ndarray:
    """Integer-factor bilinear upsampling, align-corners false."""
    if factor < 1 or int(factor) != factor:
        raise ParameterError(f"factor must be a positive integer, got {factor}")
    if factor == 1:
        return plane.copy()
    h, w = plane.shape
    oy = (np.arange(h * factor) + 0.5) / factor - 0.5
    ox = (np.arange(w * factor) + 0.5) / factor - 0.5
    y0 = np.clip(np.floor(oy).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(ox).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fy = np.clip(oy - y0, 0.0, 1.0)[:, None]
    fx = np.clip(ox - x0, 0.0, 1.0)[None, :]
    a = plane[np.ix_(y0, x0)]
    b = plane[np.ix_(y0, x1)]
    c = plane[np.ix_(y1, x0)]
    d = plane[np.ix_(y1, x1)]
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d)
