"""Exception hierarchy shared by all modules."""


class SpeclocError(Exception):
    """Base class for every error raised by the package."""


class GeometryError(SpeclocError):
    """Infeasible cell geometry (clearance, segment count, ...)."""


class ConfigurationError(SpeclocError):
    """Invalid domain or run configuration."""


class CoefficientError(SpeclocError):
    """Coefficient field violates ellipticity or positivity."""


class ConstraintError(SpeclocError):
    """Inconsistent reduction data (periodic pairing, mean-zero system)."""


class HypothesisError(SpeclocError):
    """Input violates a structural hypothesis of the localization theory."""


class EigensolverError(SpeclocError):
    """Eigensolver did not converge.

    Attributes
    ----------
    residuals : numpy.ndarray or None
        Best relative residuals reached before giving up.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class FactorizationError(EigensolverError):
    """The shifted matrix ``A - sigma*B`` could not be factorized."""


class InternalConsistencyError(SpeclocError):
    """A computed quantity failed a self-check (e.g. asymmetric tensor)."""
