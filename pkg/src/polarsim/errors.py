"""Exception types shared across the package."""


class PolarsimError(Exception):
    """Base class for all polarsim errors."""


class ShapeMismatchError(PolarsimError, ValueError):
    """Image planes or tensors with incompatible dimensions."""


class ParameterError(PolarsimError, ValueError):
    """Out-of-range or unsupported configuration value."""


class PhysicalValidityError(PolarsimError, ValueError):
    """Stokes data violating the linear-polarization constraint."""
