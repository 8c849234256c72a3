"""Classical sparse-to-dense interpolation baselines for Stokes planes.

All three interpolators treat the s0, s1, s2 planes independently, are
exact at mask sites, and produce convex combinations of the masked
input values.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError
from .images import PixelMask, RgbImage, StokesImage


def _mask_points(mask: PixelMask) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.nonzero(mask.m)
    if ys.size == 0:
        raise ParameterError("mask has no set pixels")
    return ys, xs


def interp_nearest(sparse: StokesImage, mask: PixelMask) -> StokesImage:
    """Nearest-site interpolation (Euclidean; ties favor smaller row, then column)."""
    ys, xs = _mask_points(mask)
    h, w = mask.m.shape
    yy, xx = np.mgrid[0:h, 0:w]
    # sites enumerated row-major, so argmin's first-match rule is the tie-break
    d2 = (yy[..., None] - ys) ** 2 + (xx[..., None] - xs) ** 2
    idx = np.argmin(d2, axis=-1)
    out = []
    for plane in (sparse.s0, sparse.s1, sparse.s2):
        out.append(plane[ys[idx], xs[idx]])
    return StokesImage(*out)


def _lattice_axes(mask: PixelMask) -> tuple[np.ndarray, np.ndarray] | None:
    """Rows/cols if the mask is exactly an outer product of two index sets."""
    rows = np.nonzero(mask.m.any(axis=1))[0]
    cols = np.nonzero(mask.m.any(axis=0))[0]
    expect = np.zeros_like(mask.m)
    expect[np.ix_(rows, cols)] = 1
    if np.array_equal(expect, mask.m):
        return rows, cols
    return None


def _interp_axis(values: np.ndarray, coords: np.ndarray, n: int, axis: int) -> np.ndarray:
    """1-d linear interpolation along one axis, clamped at the borders."""
    out_pos = np.arange(n)
    values = np.moveaxis(values, axis, 0)
    res = np.empty((n,) + values.shape[1:], dtype=np.float64)
    idx = np.searchsorted(coords, out_pos, side="right") - 1
    idx = np.clip(idx, 0, len(coords) - 2) if len(coords) > 1 else np.zeros(n, int)
    if len(coords) == 1:
        res[:] = values[0]
    else:
        c0, c1 = coords[idx], coords[idx + 1]
        f = np.clip((out_pos - c0) / (c1 - c0), 0.0, 1.0)
        f = f.reshape((n,) + (1,) * (values.ndim - 1))
        res = (1.0 - f) * values[idx] + f * values[idx + 1]
    return np.moveaxis(res, 0, axis)


def interp_bilinear_scattered(sparse: StokesImage, mask: PixelMask) -> StokesImage:
    """Separable bilinear interpolation over a regular lattice of mask sites.

    Border extrapolation clamps to the nearest site. If the mask is not an
    exact row x column lattice, falls back to inverse-distance-squared
    weighting of the four nearest sites.
    """
    axes = _lattice_axes(mask)
    if axes is None:
        return _idw4(sparse, mask)
    rows, cols = axes
    out = []
    for plane in (sparse.s0, sparse.s1, sparse.s2):
        grid = plane[np.ix_(rows, cols)]
        grid = _interp_axis(grid, rows, mask.m.shape[0], axis=0)
        grid = _interp_axis(grid, cols, mask.m.shape[1], axis=1)
        out.append(grid)
    return StokesImage(*out)


def _idw4(sparse: StokesImage, mask: PixelMask) -> StokesImage:
    """Inverse-distance-squared blend of the 4 nearest sites (non-lattice masks)."""
    ys, xs = _mask_points(mask)
    h, w = mask.m.shape
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (yy[..., None] - ys) ** 2 + (xx[..., None] - xs) ** 2
    k = min(4, ys.size)
    nearest = np.argsort(d2, axis=-1)[..., :k]
    nd2 = np.take_along_axis(d2, nearest, axis=-1).astype(np.float64)
    wgt = 1.0 / np.maximum(nd2, 1e-12)
    exact = nd2[..., 0] == 0
    out = []
    for plane in (sparse.s0, sparse.s1, sparse.s2):
        vals = plane[ys[nearest], xs[nearest]]
        blend = (wgt * vals).sum(-1) / wgt.sum(-1)
        blend[exact] = vals[..., 0][exact]
        out.append(blend)
    return StokesImage(*out)


def joint_bilateral(
    sparse: StokesImage,
    mask: PixelMask,
    guide: RgbImage,
    sigma_s: float,
    sigma_r: float,
) -> StokesImage:
    """RGB-guided joint bilateral interpolation of sparse Stokes samples.

    out(p) = sum_q w(p, q) v(q) / sum_q w(p, q) over mask sites q within a
    window of radius ceil(3 sigma_s), with spatial and guide-difference
    Gaussian weights. Pixels whose window holds no site fall back to the
    nearest site.
    """
    if sigma_s <= 0 or sigma_r <= 0:
        raise ParameterError("sigma_s and sigma_r must be positive")
    radius = math.ceil(3.0 * sigma_s)
    m = mask.m.astype(np.float64)
    guide_stack = guide.stack()
    inv2ss = 1.0 / (2.0 * sigma_s * sigma_s)
    inv2sr = 1.0 / (2.0 * sigma_r * sigma_r)

    h, w = mask.m.shape
    planes = [sparse.s0, sparse.s1, sparse.s2]
    acc = [np.zeros((h, w)) for _ in planes]
    wacc = np.zeros((h, w))

    def shift(a, dy, dx):
        r = max(abs(dy), abs(dx))
        p = np.pad(a, ((r, r), (r, r)), mode="constant")
        return p[r + dy : r + dy + h, r + dx : r + dx + w]

    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            ws = math.exp(-(dy * dy + dx * dx) * inv2ss)
            sm = shift(m, dy, dx)
            diff2 = np.zeros((h, w))
            for c in range(3):
                d = guide_stack[c] - shift(guide_stack[c], dy, dx)
                diff2 += d * d
            wgt = ws * sm * np.exp(-diff2 * inv2sr)
            wacc += wgt
            for i, plane in enumerate(planes):
                acc[i] += wgt * shift(plane, dy, dx)

    empty = wacc == 0
    out = [np.where(empty, 0.0, a / np.where(empty, 1.0, wacc)) for a in acc]
    if empty.any():
        fallback = interp_nearest(sparse, mask)
        for o, fb in zip(out, (fallback.s0, fallback.s1, fallback.s2)):
            o[empty] = fb[empty]
    # sample sites pass through unchanged (interpolation property)
    site = mask.m.astype(bool)
    for o, plane in zip(out, planes):
        o[site] = plane[site]
    return StokesImage(*out)


def default_sigma_s(tile_side: int) -> float:
    """Spatial sigma covering one layout tile."""
    return tile_side / 2.0
