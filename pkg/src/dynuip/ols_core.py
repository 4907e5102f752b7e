"""OLS with intercept and the sandwich covariance ``M = Q^-1 Omega Q^-1``.

Conventions
-----------
* ``Q = X'X / n`` and the stored ``xtx_inv`` is ``Q^-1`` (i.e. ``n (X'X)^-1``).
* ``sigma2 = SSR / n`` (maximum-likelihood scaling), so ``loglik`` and the
  likelihood-ratio statistics in :mod:`dynuip.dynreg` agree exactly.
* ``Var(coef) = M / n``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .errors import DegenerateRegressorError, RankDeficiencyError, ZeroStandardError

RANK_TOL = 1e-10


class Method(str, enum.Enum):
    """Estimators in the order used for every report."""

    OLS = "OLS"
    HH = "OLS-HH"
    NW = "OLS-NW"
    ANDREWS = "OLS-Andrews"
    KV = "OLS-KV"
    EWC = "OLS-EWC"
    DYNREG = "DynReg"
    RDYNREG = "RDynReg"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for m in cls:
            if key in (m.value.lower(), m.name.lower(), m.value.lower().replace("ols-", "")):
                return m
        raise ValueError(f"unknown method {value!r}")

    @property
    def is_hac(self) -> bool:
        return self in (Method.HH, Method.NW, Method.ANDREWS, Method.KV, Method.EWC)


ALL_METHODS = tuple(Method)


def least_squares(y, X):
    """QR least squares with a column-scaled rank check.

    Returns ``(coef, residuals, xtx_inv_unscaled)`` where the last item is
    ``(X'X)^-1``.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, q = X.shape
    if n < q:
        raise RankDeficiencyError(f"{n} observations for {q} parameters")
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    if np.any(norms == 0):
        raise RankDeficiencyError("design matrix has an all-zero column")
    Xs = X / norms
    Qm, R = np.linalg.qr(Xs, mode="reduced")
    d = np.abs(np.diag(R))
    if d.min() <= RANK_TOL * d.max():
        raise RankDeficiencyError(f"design matrix is rank deficient (min |R_ii| = {d.min():.3g})")
    coef_s = np.linalg.solve(R, Qm.T @ y)
    coef = coef_s / norms
    resid = y - X @ coef
    Rinv = np.linalg.solve(R, np.eye(q))
    xtx_inv = (Rinv @ Rinv.T) / np.outer(norms, norms)
    return coef, resid, (xtx_inv + xtx_inv.T) / 2


def gaussian_loglik(ssr: float, n: int) -> float:
    if ssr <= 0:
        return math.inf
    return -0.5 * n * (math.log(2 * math.pi) + math.log(ssr / n) + 1.0)


@dataclass(frozen=True)
class OlsFit:
    """Static regression ``y = alpha + beta x + u``."""

    alpha: float
    beta: float
    residuals: np.ndarray
    sigma2: float
    xtx_inv: np.ndarray
    n: int
    loglik: float
    y: np.ndarray
    X: np.ndarray

    @property
    def coef(self) -> np.ndarray:
        return np.array([self.alpha, self.beta])

    @property
    def scores(self) -> np.ndarray:
        """Moment contributions ``x_t u_t`` (n x 2, intercept column first)."""
        return self.X * self.residuals[:, None]


def ols_regress(y, x) -> OlsFit:
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(y)
    if n < 3:
        raise RankDeficiencyError(f"need at least 3 observations, got {n}")
    if np.var(x) <= 1e-12 * np.mean(x * x):
        raise DegenerateRegressorError(
            "regressor has no variation (a zero forward premium f = s yields this)"
        )
    X = np.column_stack([np.ones(n), x])
    coef, resid, inv = least_squares(y, X)
    ssr = float(resid @ resid)
    return OlsFit(
        alpha=float(coef[0]),
        beta=float(coef[1]),
        residuals=resid,
        sigma2=ssr / n,
        xtx_inv=n * inv,
        n=n,
        loglik=gaussian_loglik(ssr, n),
        y=y,
        X=X,
    )


def ols_fit(sample) -> OlsFit:
    """Fit ``y = alpha + beta x + u`` by QR least squares on a RegressionSample."""
    return ols_regress(sample.y, sample.x)


@dataclass(frozen=True)
class CovEstimate:
    """Long-run covariance ``omega`` of the scores and sandwich ``m``.

    ``df`` is ``inf`` for normal inference, finite for Student-t (EWC).
    ``critical_values`` holds fixed-b two-sided (5%, 1%) critical values when
    the test statistic has a nonstandard limit (KV).
    """

    method: Method
    omega: np.ndarray
    m: np.ndarray | None = None
    bandwidth: float = 0.0
    df: float = math.inf
    psd_repaired: bool = False
    critical_values: tuple[float, float] | None = None

    def with_bread(self, q_inv) -> "CovEstimate":
        q_inv = np.asarray(q_inv, dtype=float)
        m = q_inv @ self.omega @ q_inv
        m = (m + m.T) / 2
        return CovEstimate(self.method, self.omega, m, self.bandwidth, self.df,
                           self.psd_repaired, self.critical_values)


def ols_cov(fit: OlsFit) -> CovEstimate:
    """Classical covariance, ``Omega = sigma2 Q`` so that ``M = sigma2 Q^-1``."""
    Q = fit.X.T @ fit.X / fit.n
    omega = fit.sigma2 * (Q + Q.T) / 2
    return CovEstimate(Method.OLS, omega).with_bread(fit.xtx_inv)


@dataclass(frozen=True)
class TestResult:
    estimate: float
    se: float
    t_stat: float
    null_value: float
    p_value: float
    reject_at_5pct: bool
    method: Method

    __test__ = False  # not a pytest class


def _t_ref_quantile(df, q):
    return stats.norm.ppf(q) if math.isinf(df) else stats.t.ppf(q, df)


@functools.lru_cache(maxsize=64)
def _scaled_t(cv95: float, cv99: float) -> tuple[float, float]:
    """Scale ``c`` and degrees of freedom ``nu`` (``inf`` for normal) matching both values."""
    ratio = cv99 / cv95
    normal_ratio = stats.norm.ppf(0.995) / stats.norm.ppf(0.975)
    if ratio <= normal_ratio * (1 + 1e-9):
        return cv95 / stats.norm.ppf(0.975), math.inf

    def gap(log_nu):
        nu = math.exp(log_nu)
        return stats.t.ppf(0.995, nu) / stats.t.ppf(0.975, nu) - ratio

    nu = math.exp(optimize.brentq(gap, math.log(0.2), math.log(1e7), xtol=1e-12))
    return cv95 / stats.t.ppf(0.975, nu), nu


def fixed_b_pvalue(t_abs: float, cv95: float, cv99: float) -> float:
    """Two-sided p-value from a scaled Student-t matched to two critical values.

    The scale ``c`` and degrees of freedom ``nu`` solve
    ``c t_nu(0.975) = cv95`` and ``c t_nu(0.995) = cv99``, so the p-value is
    exactly 0.05 at ``cv95`` and 0.01 at ``cv99``.
    """
    c, nu = _scaled_t(float(cv95), float(cv99))
    if math.isinf(nu):
        return float(2 * stats.norm.sf(t_abs / c))
    return float(2 * stats.t.sf(t_abs / c, nu))


def make_test(estimate: float, se: float, null_value: float, method: Method,
              df: float = math.inf, critical_values=None) -> TestResult:
    """Two-sided test of ``estimate == null_value`` given its standard error."""
    if not se > 0:
        raise ZeroStandardError(f"standard error is {se}; the test statistic is undefined",
                                estimate=float(estimate), null_value=float(null_value), method=method)
    t = (estimate - null_value) / se
    if critical_values is not None:
        cv95, cv99 = critical_values
        p = fixed_b_pvalue(abs(t), cv95, cv99)
        reject = abs(t) > cv95
    else:
        p = float(2 * (stats.norm.sf(abs(t)) if math.isinf(df) else stats.t.sf(abs(t), df)))
        reject = abs(t) > _t_ref_quantile(df, 0.975)
    return TestResult(float(estimate), float(se), float(t), float(null_value), p, bool(reject), method)


def t_test(fit: OlsFit, cov: CovEstimate, coef_index: int = 1, null_value: float = 0.0) -> TestResult:
    """t-test on one OLS coefficient using a sandwich covariance from the same fit."""
    if cov.m is None:
        cov = cov.with_bread(fit.xtx_inv)
    var = cov.m[coef_index, coef_index] / fit.n
    se = math.sqrt(var) if var > 0 else 0.0
    return make_test(fit.coef[coef_index], se, null_value, cov.method, cov.df, cov.critical_values)
