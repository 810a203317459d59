"""Exception types shared across the package."""


class RydchainError(Exception):
    """Base class for package errors."""


class ConfigError(RydchainError):
    """Invalid configuration or parameter set."""


class IntegrationError(RydchainError):
    """Time integration failed (step-size underflow or step budget exhausted).

    Carries the partial trajectory computed so far in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class CriticalPointNotFound(RydchainError):
    """No root-count change found in the scanned drive window."""


class NumericalFailure(RydchainError):
    """A solver produced a state violating its invariants beyond tolerance."""


class ResourceGuardError(RydchainError):
    """Requested problem size exceeds the configured guard."""
