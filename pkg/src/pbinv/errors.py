"""Exception types shared across the package.

Exit codes used by the command line tool: 2 usage, 3 scene validation,
4 guarantee violation.
"""


class PbinvError(Exception):
    """Base class for package errors."""

    exit_code = 1


class UsageError(PbinvError):
    """Bad arguments or malformed input files."""

    exit_code = 2


class SceneValidationError(PbinvError):
    """A scene fails its class-level side conditions."""

    exit_code = 3


class GuaranteeViolation(PbinvError):
    """A construction's advertised bound does not hold when re-measured."""

    exit_code = 4


class SurfaceMismatchError(UsageError):
    """Two fields living on different surfaces were combined."""


class IntegrationError(PbinvError):
    """A Hamiltonian flow integration failed (non-convergence or escape)."""
