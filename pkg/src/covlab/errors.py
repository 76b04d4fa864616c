"""Exception hierarchy shared across covlab."""


class CovlabError(Exception):
    pass


class ValidationError(CovlabError, ValueError):
    """Malformed input: bad weights, mismatched dimensions, out-of-domain arguments."""


class CapacityError(CovlabError, RuntimeError):
    """A requested enumeration or codebook exceeds its configured cap."""

    def __init__(self, message, required=None, cap=None):
        super().__init__(message)
        self.required = required
        self.cap = cap


class ZeroMassError(CovlabError, ValueError):
    """Conditioning on, or evaluating a ratio at, a zero-probability symbol."""


class DensityUndefinedError(ZeroMassError):
    """Information density requested where a marginal probability is zero."""


class NegativeInfiniteDensityError(ZeroMassError):
    """Joint probability is zero while both marginals are positive."""


class UnsupportedFamilyError(CovlabError, TypeError):
    pass


class EstimationError(CovlabError, ValueError):
    pass
