"""Exception types raised across the package."""


class PixshufError(Exception):
    """Base class for all pixshuf errors."""


class IoError(PixshufError, OSError):
    """A file could not be read or written."""


class FormatError(PixshufError, ValueError):
    """File bytes could not be decoded as a supported raster."""


class DimensionError(PixshufError, ValueError):
    """Array or image shapes are inconsistent with an operation."""


class NonFiniteError(PixshufError, FloatingPointError):
    """An objective, gradient or parameter became NaN or infinite."""

    def __init__(self, message, iteration=None, level=None):
        super().__init__(message)
        self.iteration = iteration
        self.level = level
