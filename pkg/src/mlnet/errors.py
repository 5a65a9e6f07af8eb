"""Exception hierarchy shared across the package."""


class MLNetError(Exception):
    """Base class for all package errors."""


class DataError(MLNetError):
    """Malformed or inconsistent input data (corpus, hierarchy, embeddings)."""


class DegenerateInputError(MLNetError):
    """A document or sequence with nothing left to encode."""


class NumericError(MLNetError):
    """Non-finite values encountered during training or inference."""
