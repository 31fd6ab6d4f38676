"""Exception hierarchy shared by all modules."""


class MagEnergyError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(MagEnergyError, ValueError):
    """Geometry parameters are outside the physical domain."""


class InvalidProfileError(MagEnergyError, ValueError):
    """A spin-density profile cannot be normalized or is malformed."""


class WrongProfileKindError(MagEnergyError, TypeError):
    """Operation requires a different profile symmetry."""


class RegionError(MagEnergyError, ValueError):
    """Field requested outside the region where the image construction is valid."""


class QuadratureFailure(MagEnergyError, RuntimeError):
    """A quadrature did not reach its requested tolerance."""


class FitFailure(MagEnergyError, RuntimeError):
    """A least-squares fit is underdetermined or degenerate."""
