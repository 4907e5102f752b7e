"""Exception and warning types shared across the package."""


class DynUipError(Exception):
    """Base class for package errors."""


class DataError(DynUipError):
    """Input data failed validation (malformed rows, bad prices, bad dates)."""

    def __init__(self, message, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DegenerateRegressorError(DynUipError):
    """The regressor has (numerically) no variation, e.g. a zero forward premium."""


class RankDeficiencyError(DynUipError):
    """The design matrix is not of full column rank."""


class InfeasibleError(DynUipError):
    """A numerical construction has no valid solution (e.g. non-invertible MA)."""


class ZeroStandardError(InfeasibleError):
    """A test statistic was requested for an estimate with zero standard error.

    Happens for perfect fits; the estimate itself is kept on the exception.
    """

    def __init__(self, message, estimate=None, null_value=None, method=None):
        super().__init__(message)
        self.estimate = estimate
        self.null_value = null_value
        self.method = method


class ConfigError(DynUipError):
    """Invalid configuration: unknown keys, bad values."""


class DataWarning(UserWarning):
    """Recoverable oddities in input data (unsorted rows, calendar gaps)."""


class NumericalWarning(UserWarning):
    """Numerical repairs or caps applied during estimation."""
