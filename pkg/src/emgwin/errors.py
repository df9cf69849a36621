"""Exception hierarchy shared across the package."""


class EmgwinError(Exception):
    """Base class for all package errors."""


class DataFormatError(EmgwinError):
    """A dataset, model or results file is missing, malformed or inconsistent."""


class LengthMismatchError(DataFormatError):
    """A payload file does not hold the number of values its header declares."""


class VersionError(DataFormatError):
    """Unknown format version or wrong magic bytes."""


class ShapeError(EmgwinError, ValueError):
    """Tensor, parameter or payload shapes do not agree."""


class NumericalError(EmgwinError, ArithmeticError):
    """A non-finite value appeared during training or evaluation."""
