"""Exception types raised by the package."""


class PocsrecError(Exception):
    """Base class for package errors."""


class InvalidBandError(PocsrecError, ValueError):
    """Band edge outside ``(0, G/2]``."""


class GridMismatchError(PocsrecError, ValueError):
    """Operands live on different grids."""


class DimensionMismatchError(PocsrecError, ValueError):
    """Vector or matrix shapes are incompatible."""


class InvalidSamplingError(PocsrecError, ValueError):
    """Boundaries or instants violate ordering or range requirements."""


class RankDeficientError(PocsrecError, ValueError):
    """A matrix that must have full column rank does not."""
