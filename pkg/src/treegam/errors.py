"""Exception types shared across the package."""


class DataError(ValueError):
    """Bad input data: parse failures, missing columns, non-finite values."""


class ModelFormatError(ValueError):
    """Model file is corrupt, truncated, or carries an unsupported version."""


class NumericalError(RuntimeError):
    """A linear solve failed in a way that ridge regularization should prevent."""
