"""Exception types shared across the package."""

import numpy as np


class ValidationError(ValueError):
    """Bad input: shapes, labels, file contents, config keys."""


class NumericalError(ArithmeticError):
    """Numerical failure: non-finite values, singular systems."""


class ConvergenceError(NumericalError):
    """An iterative solver ran out of iterations.

    Carries the last iterate and its optimality (KKT) residual so callers
    can inspect or salvage the partial result.
    """

    def __init__(self, message, last_iterate=None, kkt_residual=None):
        super().__init__(message)
        self.last_iterate = None if last_iterate is None else np.asarray(last_iterate)
        self.kkt_residual = kkt_residual
