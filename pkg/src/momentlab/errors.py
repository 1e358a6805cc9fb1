"""Exception types shared across the package."""


class MomentlabError(Exception):
    """Base class for package-specific failures."""


class ConfigError(MomentlabError):
    """Invalid experiment configuration (schema violation, bad value)."""


class CostGuardError(MomentlabError):
    """A request exceeds the documented cost limits (N, m, table size)."""


class EigenSolverError(MomentlabError):
    """The dense eigensolver failed to converge."""


class SingularShiftError(MomentlabError):
    """Resolvent shift is singular or too ill-conditioned to trust.

    Carries ``condition`` with the estimated condition number when available.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class FitError(MomentlabError):
    """A least-squares fit could not be performed (window, degeneracy)."""


class IntegrationError(MomentlabError):
    """Time integration violated its contract (step size, non-finite state)."""


class RegimeConsistencyError(MomentlabError):
    """Time-domain and saddle-point classifications disagree."""
