import numpy as np
import pytest

from polarsim.images import RgbImage, StokesImage


def random_valid_stokes(rng, h, w, s0_lo=0.1, s0_hi=1.0, dolp_max=1.0):
    """Random physically valid Stokes planes (DoLP <= dolp_max)."""
    s0 = rng.uniform(s0_lo, s0_hi, (h, w))
    d = rng.uniform(0.0, dolp_max, (h, w))
    two_a = rng.uniform(0.0, 2.0 * np.pi, (h, w))
    return StokesImage(s0, s0 * d * np.cos(two_a), s0 * d * np.sin(two_a))


def random_rgb(rng, h, w):
    return RgbImage(*rng.uniform(0.0, 1.0, (3, h, w)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
