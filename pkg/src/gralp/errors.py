"""Exception types raised by gralp."""

import numpy as np


class GralpError(Exception):
    """Base class for all gralp errors."""


class InvalidParameterError(GralpError, ValueError):
    pass


class InvalidModeError(GralpError, ValueError):
    pass


class NumericFailureError(GralpError, ArithmeticError):
    pass


class UndefinedMeasureError(GralpError, ArithmeticError):
    pass


class SingularSystemError(GralpError, np.linalg.LinAlgError):
    """A linear system of the closed-form solve has no unique solution.

    Attributes
    ----------
    which : str
        Name of the offending system ("source" or "target").
    smallest_singular_value : float
        Smallest singular value of the offending matrix.
    """

    def __init__(self, which, smallest_singular_value, message=None):
        self.which = which
        self.smallest_singular_value = float(smallest_singular_value)
        if message is None:
            message = (
                f"{which} system matrix is singular "
                f"(smallest singular value {self.smallest_singular_value:.3e})"
            )
        super().__init__(message)
