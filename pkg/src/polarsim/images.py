"""Image containers used throughout the pipeline.

All containers hold float numpy planes of identical shape. Values are
camera-referred intensities unless stated otherwise; nothing here clamps
or rescales, the containers only enforce structural consistency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


def _plane(a) -> np.ndarray:
    a = np.asarray(a)
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float64)
    if a.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-d plane, got shape {a.shape}")
    return a


def _check_same_shape(*planes: np.ndarray) -> None:
    shapes = {p.shape for p in planes}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"planes disagree on shape: {sorted(shapes)}")


@dataclass
class StokesImage:
    """Linear-polarization Stokes planes (total, 0/90 diff, 45/135 diff)."""

    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray

    def __post_init__(self):
        self.s0, self.s1, self.s2 = _plane(self.s0), _plane(self.s1), _plane(self.s2)
        _check_same_shape(self.s0, self.s1, self.s2)

    @property
    def height(self) -> int:
        return self.s0.shape[0]

    @property
    def width(self) -> int:
        return self.s0.shape[1]

    def stack(self) -> np.ndarray:
        """(3, H, W) view-copy in s0, s1, s2 order."""
        return np.stack([self.s0, self.s1, self.s2])

    @classmethod
    def from_stack(cls, a: np.ndarray) -> "StokesImage":
        return cls(a[0], a[1], a[2])


@dataclass
class FourAngleImage:
    """Polarizer-filtered intensities at 0/45/90/135 degrees.

    density is "dense" for full ground truth or "sparse" for zero-filled
    planes that only carry values at polarization-pixel sites.
    """

    l0: np.ndarray
    l45: np.ndarray
    l90: np.ndarray
    l135: np.ndarray
    density: str = "dense"

    def __post_init__(self):
        self.l0, self.l45 = _plane(self.l0), _plane(self.l45)
        self.l90, self.l135 = _plane(self.l90), _plane(self.l135)
        _check_same_shape(self.l0, self.l45, self.l90, self.l135)
        if self.density not in ("dense", "sparse"):
            raise ValueError(f"unknown density {self.density!r}")

    @property
    def height(self) -> int:
        return self.l0.shape[0]

    @property
    def width(self) -> int:
        return self.l0.shape[1]

    def stack(self) -> np.ndarray:
        return np.stack([self.l0, self.l45, self.l90, self.l135])


@dataclass
class RgbImage:
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.r, self.g, self.b = _plane(self.r), _plane(self.g), _plane(self.b)
        _check_same_shape(self.r, self.g, self.b)

    @property
    def height(self) -> int:
        return self.r.shape[0]

    @property
    def width(self) -> int:
        return self.r.shape[1]

    def stack(self) -> np.ndarray:
        return np.stack([self.r, self.g, self.b])

    @classmethod
    def from_stack(cls, a: np.ndarray) -> "RgbImage":
        return cls(a[0], a[1], a[2])


@dataclass
class GrayImage:
    y: np.ndarray

    def __post_init__(self):
        self.y = _plane(self.y)

    @property
    def height(self) -> int:
        return self.y.shape[0]

    @property
    def width(self) -> int:
        return self.y.shape[1]


@dataclass
class PixelMask:
    """Binary plane, 1 marks polarization-pixel sites."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m)
        vals = np.unique(m)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError("mask values must be 0 or 1")
        self.m = m.astype(np.uint8)
        if self.m.ndim != 2:
            raise ShapeMismatchError(f"expected a 2-d mask, got shape {m.shape}")

    @property
    def height(self) -> int:
        return self.m.shape[0]

    @property
    def width(self) -> int:
        return self.m.shape[1]

    @property
    def count(self) -> int:
        return int(self.m.sum())
