"""Exception types shared across the package."""


class BilocError(Exception):
    """Base class for all errors raised by :mod:`bilocality`."""


class InvalidInputError(BilocError, ValueError):
    """An argument, file or configuration failed validation."""


class NumericalConsistencyError(BilocError, ArithmeticError):
    """A computed quantity drifted outside its numerical tolerance."""


class TheoremViolationError(BilocError, RuntimeError):
    """A search guaranteed to succeed came back empty.

    This only happens when an upstream invariant (usually triad
    orthonormality) is broken.
    """
