"""Exception hierarchy shared across the package.

Configuration problems (bad sizes, bad config files) are distinguished from
numerical failures (non-convergence, spectra that violate the two-bound-state
setup) so the CLI can map them to exit codes 1 and 2 respectively.
"""


class NlslabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NlslabError):
    """Invalid sizes, malformed config files, unknown keys."""


class SpectrumError(NlslabError):
    """Linear potential does not carry the required two bound states."""


class SolveError(NlslabError):
    """Newton (or other iterative) solve failed to converge."""


class DomainError(NlslabError):
    """Input is outside the domain where the operation is defined."""


class BranchError(NlslabError):
    """Ground-state branch sweep produced no usable samples."""


class SpectralError(NlslabError):
    """Linearized operator spectrum inconsistent with the assumed setup."""


class NotPSDError(NlslabError):
    """Matrix expected to be positive semidefinite is not."""


class ConvergenceError(NlslabError):
    """Limit extraction (extrapolation / long-time integral) not trustworthy."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class IntegrationError(NlslabError):
    """Time stepping produced non-finite values."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class FrameError(NlslabError):
    """Field too far from the ground-state branch to decompose."""


class RenormError(NlslabError):
    """Mass renormalization iteration failed to contract."""

    def __init__(self, message, iterates=None):
        super().__init__(message)
        self.iterates = list(iterates or [])


class FitError(NlslabError):
    """Decay-exponent fit rejected (bad window or nonpositive data)."""
