"""Analytic ground-truth scenes with controllable polarization fields.

Each scene is an RGB image plus per-pixel DoLP and AoLP fields. The
polarization fields are piecewise smooth with discontinuities aligned to
RGB edges; the `correlation` knob blends in an independent smooth field
to weaken that alignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .images import FourAngleImage, RgbImage, StokesImage
from .stokes import GRAY_WEIGHTS, four_angles_from_stokes

KINDS = ("gradient", "checker", "shapes", "perlin")


@dataclass
class SceneParams:
    height: int = 64
    width: int = 64
    dolp_max: float = 0.8
    correlation: float = 1.0  # 1 = polarization edges follow RGB edges
    cell: int = 8  # checker cell size
    n_shapes: int = 6
    noise_scale: int = 16  # lattice spacing of the value-noise fields

    def __post_init__(self):
        if self.height < 16 or self.width < 16:
            raise ParameterError("scene dimensions must be at least 16")
        if not 0.0 <= self.dolp_max <= 1.0:
            raise ParameterError("dolp_max must be in [0, 1]")
        if not 0.0 <= self.correlation <= 1.0:
            raise ParameterError("correlation must be in [0, 1]")


@dataclass
class Scene:
    """Ground truth: RGB plus polarization fields (AoLP in degrees)."""

    rgb: RgbImage
    dolp_field: np.ndarray
    aolp_field: np.ndarray

    def gray_stokes(self) -> StokesImage:
        wr, wg, wb = GRAY_WEIGHTS
        s0 = wr * self.rgb.r + wg * self.rgb.g + wb * self.rgb.b
        two_a = np.radians(2.0 * self.aolp_field)
        return StokesImage(
            s0,
            s0 * self.dolp_field * np.cos(two_a),
            s0 * self.dolp_field * np.sin(two_a),
        )

    def channel_stokes(self) -> tuple[StokesImage, StokesImage, StokesImage]:
        """Per-channel Stokes planes (polarization assumed spectrally flat)."""
        two_a = np.radians(2.0 * self.aolp_field)
        out = []
        for plane in (self.rgb.r, self.rgb.g, self.rgb.b):
            out.append(
                StokesImage(
                    plane,
                    plane * self.dolp_field * np.cos(two_a),
                    plane * self.dolp_field * np.sin(two_a),
                )
            )
        return tuple(out)

    def four_angles(self) -> FourAngleImage:
        return four_angles_from_stokes(self.gray_stokes())


def _smoothstep(f: np.ndarray) -> np.ndarray:
    return f * f * (3.0 - 2.0 * f)


def _value_noise(rng: np.random.Generator, h: int, w: int, scale: int) -> np.ndarray:
    """Smoothstep-interpolated lattice noise in [0, 1]."""
    gh, gw = h // scale + 2, w // scale + 2
    lattice = rng.random((gh, gw))
    y = np.arange(h) / scale
    x = np.arange(w) / scale
    y0 = y.astype(int)
    x0 = x.astype(int)
    fy = _smoothstep(y - y0)[:, None]
    fx = _smoothstep(x - x0)[None, :]
    a = lattice[np.ix_(y0, x0)]
    b = lattice[np.ix_(y0, x0 + 1)]
    c = lattice[np.ix_(y0 + 1, x0)]
    d = lattice[np.ix_(y0 + 1, x0 + 1)]
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d)


def _blend_independent(
    aligned: np.ndarray,
    rng: np.random.Generator,
    params: SceneParams,
    lo: float,
    hi: float,
) -> np.ndarray:
    """Mix an aligned field with an independent smooth field per correlation."""
    if params.correlation >= 1.0:
        return aligned
    indep = lo + (hi - lo) * _value_noise(
        rng, aligned.shape[0], aligned.shape[1], params.noise_scale
    )
    return params.correlation * aligned + (1.0 - params.correlation) * indep


def generate(kind: str, params: SceneParams, seed: int) -> Scene:
    """Deterministic scene of the requested kind."""
    if kind not in KINDS:
        raise ParameterError(f"unknown scene kind {kind!r}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, KINDS.index(kind)])))
    h, w = params.height, params.width
    yy, xx = np.mgrid[0:h, 0:w]
    ny, nx = yy / (h - 1), xx / (w - 1)

    if kind == "gradient":
        angles = rng.uniform(0, 2 * np.pi, size=3)
        chans = []
        for a in angles:
            ramp = np.cos(a) * nx + np.sin(a) * ny
            ramp = (ramp - ramp.min()) / max(float(np.ptp(ramp)), 1e-9)
            chans.append(0.1 + 0.8 * ramp)
        rgb = RgbImage(*chans)
        d_ang = rng.uniform(0, 2 * np.pi)
        dramp = np.cos(d_ang) * nx + np.sin(d_ang) * ny
        dramp = (dramp - dramp.min()) / max(float(np.ptp(dramp)), 1e-9)
        dolp_f = params.dolp_max * dramp
        aolp_f = 179.0 * (np.cos(d_ang + 1.3) * nx + np.sin(d_ang + 1.3) * ny - (-1.5)) / 3.0
        aolp_f = np.mod(aolp_f, 180.0)
    elif kind == "checker":
        cy, cx = yy // params.cell, xx // params.cell
        nyc, nxc = int(np.ceil(h / params.cell)), int(np.ceil(w / params.cell))
        colors = rng.uniform(0.05, 0.95, size=(nyc, nxc, 3))
        dolps = rng.uniform(0.0, params.dolp_max, size=(nyc, nxc))
        aolps = rng.uniform(0.0, 180.0, size=(nyc, nxc))
        rgb = RgbImage(colors[cy, cx, 0], colors[cy, cx, 1], colors[cy, cx, 2])
        dolp_f = dolps[cy, cx]
        aolp_f = aolps[cy, cx]
    elif kind == "shapes":
        color = rng.uniform(0.1, 0.9, size=3)
        planes = [np.full((h, w), c) for c in color]
        dolp_f = np.full((h, w), rng.uniform(0.0, 0.3 * params.dolp_max))
        aolp_f = np.full((h, w), rng.uniform(0.0, 180.0))
        for _ in range(params.n_shapes):
            c = rng.uniform(0.05, 0.95, size=3)
            d = rng.uniform(0.2 * params.dolp_max, params.dolp_max)
            a = rng.uniform(0.0, 180.0)
            if rng.random() < 0.5:
                y0, x0 = rng.integers(0, h - 4), rng.integers(0, w - 4)
                y1 = rng.integers(y0 + 4, min(y0 + h // 2, h) + 1)
                x1 = rng.integers(x0 + 4, min(x0 + w // 2, w) + 1)
                sel = (yy >= y0) & (yy < y1) & (xx >= x0) & (xx < x1)
            else:
                cy0 = rng.integers(4, h - 4)
                cx0 = rng.integers(4, w - 4)
                rad = rng.integers(3, max(4, min(h, w) // 4))
                sel = (yy - cy0) ** 2 + (xx - cx0) ** 2 <= rad * rad
            for p, ci in zip(planes, c):
                p[sel] = ci
            dolp_f = np.where(sel, d, dolp_f)
            aolp_f = np.where(sel, a, aolp_f)
        rgb = RgbImage(*planes)
    else:  # perlin
        chans = [
            0.05 + 0.9 * _value_noise(rng, h, w, params.noise_scale) for _ in range(3)
        ]
        rgb = RgbImage(*chans)
        wr, wg, wb = GRAY_WEIGHTS
        luma = wr * chans[0] + wg * chans[1] + wb * chans[2]
        lum01 = (luma - luma.min()) / max(float(np.ptp(luma)), 1e-9)
        dolp_f = params.dolp_max * lum01
        aolp_f = 179.0 * lum01

    dolp_f = np.clip(
        _blend_independent(dolp_f, rng, params, 0.0, params.dolp_max),
        0.0,
        params.dolp_max,
    )
    aolp_f = np.mod(_blend_independent(aolp_f, rng, params, 0.0, 179.0), 180.0)
    return Scene(rgb, dolp_f, aolp_f)


@dataclass
class ManifestEntry:
    index: int
    kind: str
    seed: int
    split: str


def make_dataset(
    n_scenes: int,
    split_ratios: tuple[float, float, float],
    params: SceneParams = None,
    seed: int = 0,
) -> list[ManifestEntry]:
    """Deterministic train/val/test manifest; kinds cycle round-robin."""
    if n_scenes < 3:
        raise ParameterError("need at least 3 scenes for three splits")
    if abs(sum(split_ratios) - 1.0) > 1e-9:
        raise ParameterError("split ratios must sum to 1")
    counts = [int(n_scenes * r) for r in split_ratios]
    remainders = [n_scenes * r - c for r, c in zip(split_ratios, counts)]
    for j in sorted(range(3), key=lambda j: -remainders[j]):
        if sum(counts) == n_scenes:
            break
        counts[j] += 1
    # every split gets at least one scene
    for j in range(3):
        if counts[j] == 0:
            counts[counts.index(max(counts))] -= 1
            counts[j] += 1
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n_scenes)
    split_of = {}
    names = ("train", "val", "test")
    pos = 0
    for name, cnt in zip(names, counts):
        for j in order[pos : pos + cnt]:
            split_of[int(j)] = name
        pos += cnt
    return [
        ManifestEntry(i, KINDS[i % len(KINDS)], seed * 100003 + i, split_of[i])
        for i in range(n_scenes)
    ]
