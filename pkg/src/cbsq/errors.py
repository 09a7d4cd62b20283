"""Exception hierarchy shared by all modules."""


class CbsqError(Exception):
    """Base class for all package errors."""


class ConfigError(CbsqError):
    """Invalid configuration document or infeasible parameter combination."""


class DomainError(CbsqError):
    """Operation called outside its mathematical domain of validity."""


class LatticeMismatchError(CbsqError):
    """Two fields that must share a lattice/time do not."""


class NumericalAccuracyError(CbsqError):
    """A quadrature or iteration failed to reach the requested tolerance."""


class ConfinementError(CbsqError):
    """Spectral energy reached the outer band of the vertical lattice."""


class SolverAbort(CbsqError):
    """Time integration aborted (NaN, blow-up); carries last-good info."""

    def __init__(self, message, last_good_t=None):
        super().__init__(message)
        self.last_good_t = last_good_t


class CheckpointError(CbsqError):
    """Corrupt or incompatible checkpoint file."""


class VerificationError(CbsqError):
    """A pointwise inequality or invariant check failed."""
