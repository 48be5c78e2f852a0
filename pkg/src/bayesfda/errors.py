"""Exception hierarchy shared by all bayesfda modules."""


class BayesFDAError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(BayesFDAError, ValueError):
    """Input values are malformed, empty, non-finite or out of range."""


class DomainError(InvalidInputError):
    """A value lies outside the domain of an operation (e.g. ``ln`` of 0)."""


class RangeError(BayesFDAError, ArithmeticError):
    """A result cannot be represented in floating point."""


class IncompatibleGridsError(InvalidInputError):
    """Two grid functions do not live on the same grid."""


class DegenerateDataError(InvalidInputError):
    """Data have zero spread where a positive spread is required."""

    def __init__(self, message, columns=None):
        super().__init__(message)
        self.columns = list(columns) if columns is not None else []


class OutOfSupportError(InvalidInputError):
    """A sample falls outside the estimation box."""


class InvalidDimsError(InvalidInputError):
    """A marginalisation was requested over an invalid axis subset."""


class UndefinedCompositionError(BayesFDAError, ArithmeticError):
    """The information composition of a zero-norm density is undefined."""


class InsufficientDataError(InvalidInputError):
    """Too few observations for the requested statistic."""


class InvalidBasisError(InvalidInputError):
    """B-spline basis parameters are inconsistent."""


class UnderdeterminedFitError(BayesFDAError, ArithmeticError):
    """A least-squares design matrix does not have full column rank."""


class InvalidArchetypeError(InvalidInputError):
    """Unknown contamination archetype."""


class FormatError(InvalidInputError):
    """A file does not follow the expected layout."""


class StageError(BayesFDAError, RuntimeError):
    """A pipeline stage failed; carries the stage name and compartment."""

    def __init__(self, stage, compartment, cause):
        where = f" (compartment {compartment})" if compartment is not None else ""
        super().__init__(f"stage {stage!r} failed{where}: {cause}")
        self.stage = stage
        self.compartment = compartment
        self.cause = cause
