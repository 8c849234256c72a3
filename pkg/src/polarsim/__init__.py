"""polarsim: sparse polarization sensor simulation and Stokes recovery."""

__version__ = "0.1.0"

from .images import (  # noqa: F401
    FourAngleImage,
    GrayImage,
    PixelMask,
    RgbImage,
    StokesImage,
)
from .stokes import (  # noqa: F401
    aolp,
    dolp,
    four_angles_from_stokes,
    rgb_to_gray,
    s0_from_rgb,
    stokes_from_four_angles,
    validate_physical,
)
