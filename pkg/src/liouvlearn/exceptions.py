"""Exception and warning types raised across the package."""


class DimensionMismatch(ValueError):
    pass


class NotPositiveSemiDefinite(ValueError):
    pass


class TooLarge(ValueError):
    pass


class NonFiniteState(FloatingPointError):
    pass


class InvalidProbabilities(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


class DegenerateData(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


class NonPositiveValue(ValueError):
    pass


class IllConditioned(UserWarning):
    """Vandermonde matrix condition number above the warning threshold."""
