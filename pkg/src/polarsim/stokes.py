"""Stokes-vector algebra for linear polarization.

Conventions
-----------
* Four-angle planes relate to Stokes planes through the forward model
  l(theta) = s0 + s1*cos(2 theta) + s2*sin(2 theta); the analysis transform
  below is its exact left inverse, so round trips are testable to machine
  precision.
* A physical capture behind a polarizer of transmittance t scales every
  Stokes component by t/2 uniformly, which leaves DoLP and AoLP untouched.
  All derived quantities here are scale-invariant for positive scales.
* Circular polarization is not modeled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PhysicalValidityError
from .images import FourAngleImage, GrayImage, RgbImage, StokesImage

#: Division guard for DoLP and validity epsilon for the DoLP <= 1 check.
EPS_DIV = 1e-6
EPS_VALID = 1e-6

#: Upper clamp for DoLP of non-physical (e.g. network) outputs.
DOLP_MAX = 10.0

#: ITU-R BT.601 luma weights, used as the RGB-to-gray projection.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

# cos(2 theta), sin(2 theta) for theta = 0, 45, 90, 135 degrees
_ANGLE_BASIS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


def stokes_from_four_angles(l: FourAngleImage) -> StokesImage:
    """Analysis transform: four polarizer angles -> (s0, s1, s2).

    Exact arithmetic, no clamping. Sparse input yields Stokes planes that
    are only meaningful under the corresponding pixel mask.
    """
    s0 = (l.l0 + l.l45 + l.l90 + l.l135) / 4.0
    s1 = (l.l0 - l.l90) / 2.0
    s2 = (l.l45 - l.l135) / 2.0
    return StokesImage(s0, s1, s2)


def four_angles_from_stokes(s: StokesImage, allow_invalid: bool = False) -> FourAngleImage:
    """Forward model: l(theta) = s0 + s1 cos2theta + s2 sin2theta.

    Rejects physically invalid input (DoLP > 1 + eps) unless allow_invalid.
    """
    if not allow_invalid:
        report = validate_physical(s)
        if report.violations:
            raise PhysicalValidityError(
                f"{report.violations} pixels exceed DoLP 1 "
                f"(max excess {report.max_excess:.3g}); pass allow_invalid=True to override"
            )
    planes = [s.s0 + c * s.s1 + d * s.s2 for c, d in _ANGLE_BASIS]
    return FourAngleImage(*planes)


def dolp(s: StokesImage) -> GrayImage:
    """Degree of linear polarization, clamped to [0, DOLP_MAX]."""
    mag = np.sqrt(s.s1 * s.s1 + s.s2 * s.s2)
    out = mag / np.maximum(s.s0, EPS_DIV)
    return GrayImage(np.clip(out, 0.0, DOLP_MAX))


def aolp(s: StokesImage) -> GrayImage:
    """Angle of linear polarization in degrees, in [0, 180).

    atan2(0, 0) is defined as 0 (numpy convention), so fully unpolarized
    pixels report 0 degrees.
    """
    ang = 0.5 * np.degrees(np.arctan2(s.s2, s.s1))
    ang = np.mod(ang, 180.0)
    # mod can return 180.0 for tiny negative angles; fold it back
    ang = np.where(ang >= 180.0, ang - 180.0, ang)
    return GrayImage(ang)


def rgb_to_gray(g: RgbImage, weights=GRAY_WEIGHTS) -> GrayImage:
    wr, wg, wb = weights
    return GrayImage(wr * g.r + wg * g.g + wb * g.b)


def s0_from_rgb(g: RgbImage, gain: float, weights=GRAY_WEIGHTS) -> GrayImage:
    """Unpolarized Stokes component from an RGB image, scaled by gain.

    gain absorbs the sensitivity difference between regular pixels and
    polarization pixels; with the forward model used here the consistent
    default is transmittance / 2.
    """
    if gain <= 0:
        raise ParameterError(f"gain must be positive, got {gain}")
    return GrayImage(gain * rgb_to_gray(g, weights).y)


@dataclass
class ValidityReport:
    violations: int
    max_excess: float

    @property
    def ok(self) -> bool:
        return self.violations == 0


def validate_physical(s: StokesImage) -> ValidityReport:
    """Count pixels where sqrt(s1^2 + s2^2) > s0 + eps."""
    mag = np.sqrt(s.s1 * s.s1 + s.s2 * s.s2)
    excess = mag - s.s0
    bad = excess > EPS_VALID
    max_excess = float(excess.max(initial=0.0)) if bad.any() else 0.0
    return ValidityReport(int(bad.sum()), max_excess if bad.any() else 0.0)
