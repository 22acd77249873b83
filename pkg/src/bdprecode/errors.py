"""Exception hierarchy shared by every module of the package."""


class BDPrecodeError(Exception):
    """Base class for all errors raised by bdprecode."""


class ConfigError(BDPrecodeError, ValueError):
    """Invalid scenario or command-line configuration.

    ``key`` names the offending configuration key when one is known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class PreconditionError(BDPrecodeError, ValueError):
    """An operation was called with inputs outside its contract."""


class DimensionError(PreconditionError):
    """Matrix or antenna dimensions are inconsistent."""


class SingularityError(BDPrecodeError, ArithmeticError):
    """A matrix required to be of full rank is (numerically) rank deficient.

    ``ratio`` holds the offending smallest/largest singular value ratio.
    """

    def __init__(self, message, ratio=None):
        super().__init__(message)
        self.ratio = ratio


class DecompositionError(BDPrecodeError, ArithmeticError):
    """An iterative decomposition failed to converge."""

    def __init__(self, message, shape=None):
        super().__init__(message)
        self.shape = shape


class NumericalError(BDPrecodeError, ArithmeticError):
    """A computed quantity came out non-finite."""
