"""Exception taxonomy shared across the package.

The CLI maps these onto distinct process exit codes, so solver failures,
configuration mistakes and oracle resource refusals stay distinguishable
in batch pipelines.
"""


class GaussLdtError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(GaussLdtError):
    """Malformed configuration: bad JSON, unknown keys, missing fields."""


class InvalidNetworkError(GaussLdtError):
    """A network failed validation; carries the validation report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NoStationaryStateError(GaussLdtError):
    """The drift matrix is not Hurwitz: no stationary state exists."""


class DomainBoundaryError(GaussLdtError):
    """No stabilizing biased covariance exists at this bias value.

    Signals a branch point of the large-deviation function: the spectral
    dichotomy of the associated Hamiltonian-structured matrix fails or the
    stabilizing certificate cannot be met.
    """


class DomainEmptyError(GaussLdtError):
    """Every requested bias value lies outside the solvable domain."""


class ConvergenceError(GaussLdtError):
    """An iterative procedure did not meet its tolerance within budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class OracleResourceError(GaussLdtError):
    """The Fock-space oracle refused a request that exceeds its caps."""


class DegenerateCurveError(GaussLdtError):
    """The sampled curve is flat (theta identically zero); the symmetry
    criterion is undefined."""
