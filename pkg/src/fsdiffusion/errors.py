"""Exception and warning types shared across the package.

Every error carries a stable machine-readable ``code`` so the command line
front end can map it to a JSON error envelope without string matching.
"""

from __future__ import annotations


class FsError(Exception):
    """Base class for all package errors."""

    code = "FS_ERROR"
    #: 1 for invalid input, 2 for a numerical failure
    exit_status = 2


class ValidationError(FsError, ValueError):
    """Input outside the admissible parameter or argument domain."""

    code = "VALIDATION"
    exit_status = 1


class DomainError(ValidationError):
    code = "DOMAIN"


class InvalidParameters(ValidationError):
    code = "INVALID_PARAMETERS"


class NonconvergentSeries(FsError, ArithmeticError):
    code = "NONCONVERGENT_SERIES"


class DegenerateContinuation(FsError, ArithmeticError):
    """The 1/z continuation has singular gamma prefactors (a - b is an integer)."""

    code = "DEGENERATE_CONTINUATION"


class MomentDoesNotExist(ValidationError):
    code = "MOMENT_DOES_NOT_EXIST"


class TooFewPolynomials(ValidationError):
    code = "TOO_FEW_POLYNOMIALS"


class IndexOutOfSystem(ValidationError, IndexError):
    code = "INDEX_OUT_OF_SYSTEM"


class StepTooLarge(ValidationError):
    code = "STEP_TOO_LARGE"


class UnclassifiedParameter(ValidationError):
    code = "UNCLASSIFIED_PARAMETER"


class SpectralHypothesisViolated(ValidationError):
    code = "SPECTRAL_HYPOTHESIS"


class QuadratureNotConverged(FsError, ArithmeticError):
    code = "QUADRATURE_NOT_CONVERGED"


class OutsideConvergence(ValidationError):
    code = "OUTSIDE_CONVERGENCE"


class DegenerateSample(ValidationError):
    code = "DEGENERATE_SAMPLE"


class MomentInversionFailed(FsError, ArithmeticError):
    code = "MOMENT_INVERSION_FAILED"


class NotPositiveDefinite(FsError, ArithmeticError):
    code = "NOT_POSITIVE_DEFINITE"


class AcfNonPositive(UserWarning):
    """The sample autocorrelation was negative; its absolute value was used."""
