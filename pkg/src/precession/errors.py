"""Exception types raised by the precession toolkit."""


class PrecessionError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgument(PrecessionError, ValueError):
    pass


class UnsupportedDimension(PrecessionError, ValueError):
    """Raised for odd Hilbert-space dimensions, where sgn(0) is undefined."""


class UnsupportedRegime(PrecessionError, ValueError):
    pass


class UnsupportedState(PrecessionError, ValueError):
    pass


class NumericalInconsistency(PrecessionError, ArithmeticError):
    pass


class GradientUndefined(PrecessionError, ArithmeticError):
    """The top eigenvalue is degenerate, so its derivative is set-valued."""


class DegenerateTruncation(PrecessionError, ValueError):
    pass
