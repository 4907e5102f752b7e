"""Dynamic-regression tests of uncovered interest parity.

Modules
-------
series_io   CSV ingestion, weekly alignment, regression samples, rolling windows
ols_core    OLS with the sandwich covariance and t-tests
hac         long-run covariance estimators (HH, NW, Andrews, KV, EWC)
maproc      overlap MA factorization, inverse filter, MA simulation
dynreg      DynReg / RDynReg estimation, BIC lag choice, LR test
montecarlo  size and size-corrected power experiments
cli         the ``dynuip`` command
"""

from .errors import (
    ConfigError,
    DataError,
    DataWarning,
    DegenerateRegressorError,
    DynUipError,
    InfeasibleError,
    NumericalWarning,
    RankDeficiencyError,
    ZeroStandardError,
)
from .ols_core import Method

__all__ = [
    "ConfigError",
    "DataError",
    "DataWarning",
    "DegenerateRegressorError",
    "DynUipError",
    "InfeasibleError",
    "Method",
    "NumericalWarning",
    "RankDeficiencyError",
    "ZeroStandardError",
]
