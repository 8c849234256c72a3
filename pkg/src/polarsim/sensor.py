"""Sensor layouts, capture simulation, and analytic characteristics.

Two pixel layouts are modeled:

* conventional: every pixel carries a micro-polarizer. Colors follow a
  Quad Bayer RGGB pattern (2x2 same-color cells); within each cell the
  four polarizer angles appear once, at fixed offsets
  (0,0)->0, (0,1)->45, (1,0)->90, (1,1)->135 degrees.
* sparse: only a fraction `ratio` of pixels carry polarizers. The four
  angles form one 2x2 cluster at the top-left of every square tile of
  area 4/ratio; these pixels use a white (panchromatic) filter. All
  remaining pixels are ordinary Quad Bayer color pixels.

Capture applies polarizer attenuation (a polarization pixel sees t/2 of
the unpolarized intensity a regular pixel would) and Gaussian-approximated
shot noise with std noise_factor * sqrt(photons), in photon-equivalent
units. Read noise and color-filter transmittance are omitted.

The noise stream is a counter-based Philox generator keyed by the capture
seed, so an implementation that splits the frame into row bands can seek
the stream and reproduce the exact same field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError, ShapeMismatchError
from .images import StokesImage
from .stokes import GRAY_WEIGHTS

# pixel class codes
R, G, B = 0, 1, 2
P0, P45, P90, P135 = 3, 4, 5, 6

POL_CLASSES = (P0, P45, P90, P135)
CLASS_CHARS = {R: "R", G: "G", B: "B", P0: "0", P45: "4", P90: "9", P135: "1"}

#: (cos 2theta, sin 2theta) per polarization class
_POL_BASIS = {P0: (1.0, 0.0), P45: (0.0, 1.0), P90: (-1.0, 0.0), P135: (0.0, -1.0)}

#: angle-class offsets inside a 2x2 cluster / Quad Bayer cell
CLUSTER_OFFSETS = {(0, 0): P0, (0, 1): P45, (1, 0): P90, (1, 1): P135}


@dataclass
class SensorConfig:
    """Physical sensor parameters.

    ratio: fraction of polarization pixels (sparse layouts)
    transmittance: polarizer transmittance in (0, 1]
    noise_factor: shot-noise std = noise_factor * sqrt(photons)
    quantum_eff: quantum efficiency, used only by the analytic SNR report
    full_scale: photon count corresponding to normalized value 1.0
    """

    ratio: float = 1.0 / 16.0
    transmittance: float = 0.7
    noise_factor: float = 0.0
    quantum_eff: float = 0.8
    full_scale: float = 10000.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ParameterError(f"ratio must be in (0, 1], got {self.ratio}")
        if not 0.0 < self.transmittance <= 1.0:
            raise ParameterError(f"transmittance must be in (0, 1], got {self.transmittance}")
        if self.noise_factor < 0:
            raise ParameterError("noise_factor must be >= 0")
        if not 0.0 < self.quantum_eff <= 1.0:
            raise ParameterError(f"quantum_eff must be in (0, 1], got {self.quantum_eff}")
        if self.full_scale <= 0:
            raise ParameterError("full_scale must be positive")


def tile_side_for_ratio(ratio: float) -> int:
    """Side of the square tile holding one 2x2 polarization cluster."""
    side = math.sqrt(4.0 / ratio)
    s = round(side)
    if s < 2 or abs(side - s) > 1e-9:
        raise ParameterError(f"unsupported ratio {ratio}: 4/ratio must be a perfect square")
    return s


@dataclass
class SensorLayout:
    """Per-pixel class grid plus layout kind."""

    class_grid: np.ndarray  # uint8 codes from the table above
    kind: str  # "conventional" | "sparse"
    ratio: float  # fraction of polarization pixels (1.0 for conventional)

    @property
    def height(self) -> int:
        return self.class_grid.shape[0]

    @property
    def width(self) -> int:
        return self.class_grid.shape[1]

    @property
    def pol_mask(self) -> np.ndarray:
        return (self.class_grid >= P0).astype(np.uint8)

    @property
    def pol_fraction(self) -> float:
        return float(self.pol_mask.mean())

    def text(self) -> str:
        """One character per pixel class; golden-test friendly."""
        rows = ["".join(CLASS_CHARS[c] for c in row) for row in self.class_grid]
        return "\n".join(rows) + "\n"


def quad_bayer_colors(height: int, width: int) -> np.ndarray:
    """Quad Bayer RGGB color codes (2x2 same-color cells, 4x4 period)."""
    yy, xx = np.mgrid[0:height, 0:width]
    cy, cx = (yy // 2) % 2, (xx // 2) % 2
    colors = np.empty((height, width), dtype=np.uint8)
    colors[(cy == 0) & (cx == 0)] = R
    colors[(cy == 0) & (cx == 1)] = G
    colors[(cy == 1) & (cx == 0)] = G
    colors[(cy == 1) & (cx == 1)] = B
    return colors


def conventional_angles(height: int, width: int) -> np.ndarray:
    """Angle class per pixel for the conventional layout."""
    yy, xx = np.mgrid[0:height, 0:width]
    grid = np.empty((height, width), dtype=np.uint8)
    for (dy, dx), cls in CLUSTER_OFFSETS.items():
        grid[(yy % 2 == dy) & (xx % 2 == dx)] = cls
    return grid


def build_layout(kind: str, height: int, width: int, ratio: float | None = None) -> SensorLayout:
    """Deterministic pixel-class grid for either sensor kind."""
    if kind == "conventional":
        if height % 4 or width % 4:
            raise ParameterError("conventional layout needs dimensions divisible by 4")
        return SensorLayout(conventional_angles(height, width), "conventional", 1.0)
    if kind == "sparse":
        if ratio is None:
            raise ParameterError("sparse layout requires a ratio")
        side = tile_side_for_ratio(ratio)
        period = side if side % 4 == 0 else side * 4 // math.gcd(side, 4)
        if height % period or width % period:
            raise ParameterError(
                f"dimensions must be multiples of the tile period {period} "
                f"for ratio {ratio}"
            )
        grid = quad_bayer_colors(height, width)
        yy, xx = np.mgrid[0:height, 0:width]
        ty, tx = yy % side, xx % side
        for (dy, dx), cls in CLUSTER_OFFSETS.items():
            grid[(ty == dy) & (tx == dx)] = cls
        return SensorLayout(grid, "sparse", float(ratio))
    raise ParameterError(f"unknown layout kind {kind!r}")


@dataclass
class RawFrame:
    """Single-channel mosaic capture plus the producing layout/config."""

    values: np.ndarray
    layout: SensorLayout
    config: SensorConfig

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def capture(
    channel_stokes: tuple[StokesImage, StokesImage, StokesImage],
    layout: SensorLayout,
    config: SensorConfig,
) -> RawFrame:
    """Simulate one exposure of the given scene.

    channel_stokes holds the scene's per-color-channel Stokes planes in
    normalized units (s0 of each channel is that channel's intensity in
    [0, 1]). Regular pixels read their channel's s0 unattenuated.
    Polarization pixels read t/2 * l(theta); sparse-layout polarization
    pixels sit behind a white filter and see the gray-projected Stokes
    planes, conventional ones see their Quad Bayer color channel.
    """
    sr, sg, sb = channel_stokes
    for s in (sg, sb):
        if s.s0.shape != sr.s0.shape:
            raise ShapeMismatchError("channel Stokes planes disagree on shape")
    if sr.s0.shape != (layout.height, layout.width):
        raise ShapeMismatchError(
            f"scene {sr.s0.shape} does not match layout "
            f"{(layout.height, layout.width)}"
        )

    half_t = 0.5 * config.transmittance
    values = np.zeros((layout.height, layout.width), dtype=np.float64)
    grid = layout.class_grid

    if layout.kind == "sparse":
        wr, wg, wb = GRAY_WEIGHTS
        gray = StokesImage(
            wr * sr.s0 + wg * sg.s0 + wb * sb.s0,
            wr * sr.s1 + wg * sg.s1 + wb * sb.s1,
            wr * sr.s2 + wg * sg.s2 + wb * sb.s2,
        )
        for code, s in ((R, sr), (G, sg), (B, sb)):
            sel = grid == code
            values[sel] = s.s0[sel]
        for code, (c2, s2) in _POL_BASIS.items():
            sel = grid == code
            values[sel] = half_t * (gray.s0[sel] + c2 * gray.s1[sel] + s2 * gray.s2[sel])
    else:
        colors = quad_bayer_colors(layout.height, layout.width)
        for ccode, s in ((R, sr), (G, sg), (B, sb)):
            for pcode, (c2, s2) in _POL_BASIS.items():
                sel = (colors == ccode) & (grid == pcode)
                values[sel] = half_t * (s.s0[sel] + c2 * s.s1[sel] + s2 * s.s2[sel])

    if config.noise_factor > 0:
        photons = np.clip(values, 0.0, None) * config.full_scale
        sigma = config.noise_factor * np.sqrt(photons) / config.full_scale
        rng = np.random.Generator(np.random.Philox(key=config.seed))
        values = values + sigma * rng.standard_normal(values.shape)

    np.clip(values, 0.0, None, out=values)
    return RawFrame(values, layout, replace(config))


@dataclass
class SnrReport:
    snr_regular: float
    snr_polarized: float
    snr_conventional_rgb: float
    snr_sparse_rgb: float
    rgb_snr_ratio: float


def snr_analysis(config: SensorConfig) -> SnrReport:
    """Analytic SNR of pixel classes at full-scale signal.

    The conventional sensor averages the four polarization angles to form
    the unpolarized value, which doubles its SNR relative to a single
    polarized pixel; the sparse sensor reads regular pixels directly. The
    RGB SNR ratio sparse/conventional is sqrt(1 / (2 t)).
    """
    s = config.full_scale
    qe = config.quantum_eff
    t = config.transmittance
    return SnrReport(
        snr_regular=math.sqrt(qe * s),
        snr_polarized=math.sqrt(t * qe * s / 2.0),
        snr_conventional_rgb=math.sqrt(2.0 * t * qe * s),
        snr_sparse_rgb=math.sqrt(qe * s),
        rgb_snr_ratio=math.sqrt(1.0 / (2.0 * t)),
    )


@dataclass
class ResolutionReport:
    rgb_factor: float
    pol_factor: float


def resolution_analysis(ratio: float) -> ResolutionReport:
    """Pixel-count factors relative to a conventional polarization sensor.

    A conventional sensor bins 2x2 to form RGB, so a sparse sensor with
    polarization fraction `ratio` has 4 * (1 - ratio) times the RGB pixels
    and `ratio` times the polarization pixels.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ParameterError(f"ratio must be in [0, 1], got {ratio}")
    return ResolutionReport(rgb_factor=4.0 * (1.0 - ratio), pol_factor=ratio)
