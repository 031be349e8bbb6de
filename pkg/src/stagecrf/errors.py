"""Exception types shared across the package."""


class DataError(Exception):
    """Malformed or mutually inconsistent data files/records."""


class NumericError(Exception):
    """A computation produced non-finite values where finite ones are required."""


class ForbiddenTransitionError(ValueError):
    """A label sequence uses a transition the mask forbids."""


class NoAllowedPathError(ValueError):
    """A potential table admits no mask-allowed label sequence."""
