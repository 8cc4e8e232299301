"""Exception types raised by roekms."""


class RoeKmsError(Exception):
    """Base class for all library errors."""


class EmptySpaceError(RoeKmsError, ValueError):
    pass


class MetricError(RoeKmsError, ValueError):
    """A distance matrix violates a metric axiom.

    ``witness`` holds the offending index tuple: a pair for asymmetry or a
    vanishing off-diagonal entry, a triple ``(x, z, y)`` with
    ``d(x, z) > d(x, y) + d(y, z)`` for the triangle inequality.
    """

    def __init__(self, message, witness=()):
        super().__init__(message)
        self.witness = tuple(witness)


class DimensionMismatchError(RoeKmsError, ValueError):
    pass


class MagnitudeError(RoeKmsError, ArithmeticError):
    """An exponent exceeded the double-precision range."""

    def __init__(self, message, exponent=None, witness=None):
        super().__init__(message)
        self.exponent = exponent
        self.witness = witness


class NegativeWeightError(RoeKmsError, ValueError):
    def __init__(self, message, witness=None, value=None):
        super().__init__(message)
        self.witness = witness
        self.value = value


class ConditioningError(RoeKmsError, ValueError):
    pass


class DivergenceError(RoeKmsError, ValueError):
    """Truncation weights failed to stabilise pointwise."""

    def __init__(self, message, max_change=None):
        super().__init__(message)
        self.max_change = max_change
