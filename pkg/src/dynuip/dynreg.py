"""Dynamic regression (ARDL) and the restricted filtered regression.

``DynReg`` fits the unrestricted ARDL(p, p)

    y_i = a + phi_1 y_{i-1} + ... + phi_p y_{i-p} + b_0 x_i + ... + b_p x_{i-p} + e_i

and reports the long-run slope ``beta(1) / phi(1)`` with
``beta(1) = sum_j b_j`` and ``phi(1) = 1 - sum_j phi_j``. Coefficients are kept
exactly as they enter the regression above.

``RDynReg`` imposes the overlap MA structure: both ``y`` and ``x`` are passed
through ``pi(L) = theta(L)^-1`` and the filtered pair is fitted by OLS with
classical standard errors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import DynUipError, InfeasibleError, NumericalWarning, RankDeficiencyError, ZeroStandardError
from .hac import HacConfig, robust_cov
from .maproc import DEFAULT_TOLERANCE, MAX_FILTER_LAG, MaPolynomial, filter_series, invert
from .ols_core import (
    Method,
    OlsFit,
    TestResult,
    gaussian_loglik,
    least_squares,
    make_test,
    ols_cov,
    ols_fit,
    ols_regress,
    t_test,
)
from .series_io import RegressionSample

DEFAULT_P_MAX = 12
PHI_ONE_TOL = 1e-8


def _ardl_design(y: np.ndarray, x: np.ndarray, p: int, start: int):
    """Response and regressor matrix for responses ``y[start:]``."""
    n = len(y)
    idx = np.arange(start, n)
    cols = [np.ones(len(idx))]
    cols += [y[idx - j] for j in range(1, p + 1)]
    cols += [x[idx - j] for j in range(0, p + 1)]
    return y[idx], np.column_stack(cols), x[idx]


@dataclass(frozen=True)
class DynRegFit:
    """Fitted ARDL(p, p) with its long-run slope.

    ``cov`` is ``sigma2 (Z'Z)^-1`` for the coefficient vector
    ``(alpha, phi_1..phi_p, beta_0..beta_p)``. ``y`` and ``x`` are the
    response and contemporaneous regressor on the effective sample, which
    starts at index ``start`` of the input sample.
    """

    p: int
    phi: np.ndarray
    beta_lags: np.ndarray
    alpha: float
    long_run_beta: float
    long_run_se: float
    cov: np.ndarray
    sigma2: float
    loglik: float
    n_effective: int
    start: int
    y: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate([[self.alpha], self.phi, self.beta_lags])

    def test(self, null_value: float = 0.0) -> TestResult:
        return make_test(self.long_run_beta, self.long_run_se, null_value, Method.DYNREG)

    def static_fit(self) -> OlsFit:
        """Static regression of ``y_i`` on ``x_i`` over the same effective sample."""
        return ols_regress(self.y, self.x)


def trim_sample(sample: RegressionSample, start: int) -> RegressionSample:
    return sample.slice(start, len(sample))


def fit_dynreg(sample: RegressionSample, p: int, start: int | None = None) -> DynRegFit:
    """Fit the ARDL(p, p) by OLS.

    ``start`` (default ``p``) is the first response index used, so several lag
    orders can share one effective sample.

    Raises
    ------
    ValueError
        If the effective sample is shorter than ``5 (2p + 2)``.
    RankDeficiencyError
        If the regressors are collinear.
    InfeasibleError
        If ``|phi(1)| <= 1e-8``.
    """
    if p < 0:
        raise ValueError("lag order p must be >= 0")
    start = p if start is None else start
    if start < p:
        raise ValueError(f"start={start} leaves no room for {p} lags")
    y_all = np.asarray(sample.y, dtype=float)
    x_all = np.asarray(sample.x, dtype=float)
    n_eff = len(y_all) - start
    if n_eff < 5 * (2 * p + 2):
        raise ValueError(f"effective sample {n_eff} too short for p={p} (need {5 * (2 * p + 2)})")
    y, Z, xcur = _ardl_design(y_all, x_all, p, start)
    coef, resid, zz_inv = least_squares(y, Z)
    ssr = float(resid @ resid)
    sigma2 = ssr / n_eff
    cov = sigma2 * zz_inv
    phi = coef[1 : p + 1]
    beta = coef[p + 1 :]
    phi_one = 1.0 - phi.sum()
    if abs(phi_one) <= PHI_ONE_TOL:
        raise InfeasibleError(f"phi(1) = {phi_one:.3g}; the long-run slope is undefined")
    if p:
        roots = np.polynomial.polynomial.polyroots(np.concatenate([[1.0], -phi]))
        if np.min(np.abs(roots)) <= 1.0:
            warnings.warn("fitted autoregressive dynamics are not stationary (root inside unit circle)",
                          NumericalWarning, stacklevel=2)
    beta_one = beta.sum()
    lr = beta_one / phi_one
    grad = np.concatenate([[0.0], np.full(p, beta_one / phi_one**2), np.full(p + 1, 1.0 / phi_one)])
    var = float(grad @ cov @ grad)
    return DynRegFit(
        p=p,
        phi=phi,
        beta_lags=beta,
        alpha=float(coef[0]),
        long_run_beta=float(lr),
        long_run_se=math.sqrt(var) if var > 0 else 0.0,
        cov=cov,
        sigma2=sigma2,
        loglik=gaussian_loglik(ssr, n_eff),
        n_effective=n_eff,
        start=start,
        y=y,
        x=xcur,
        residuals=resid,
    )


def bic_table(sample: RegressionSample, p_max: int = DEFAULT_P_MAX) -> dict[int, float]:
    """BIC ``ln sigma2 + (1 + 2p) ln(T) / T`` for each feasible ``p <= p_max``.

    All candidates use the effective sample starting at ``p_max``.
    Rank-deficient candidates are omitted.
    """
    n_eff = len(sample) - p_max
    if p_max < 0 or n_eff < 5 * (2 * p_max + 2):
        raise ValueError(f"p_max={p_max} infeasible for a sample of {len(sample)} observations")
    out = {}
    for p in range(p_max + 1):
        try:
            fit = fit_dynreg_quiet(sample, p, start=p_max)
        except (RankDeficiencyError, InfeasibleError):
            continue
        if fit.sigma2 <= 0:
            out[p] = -math.inf
            continue
        out[p] = math.log(fit.sigma2) + (1 + 2 * p) * math.log(n_eff) / n_eff
    return out


def fit_dynreg_quiet(sample, p, start=None) -> DynRegFit:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalWarning)
        return fit_dynreg(sample, p, start)


def select_p(sample: RegressionSample, p_max: int = DEFAULT_P_MAX) -> int:
    """BIC-minimising lag order; ties go to the smaller ``p``."""
    table = bic_table(sample, p_max)
    if not table:
        raise RankDeficiencyError("no lag order up to p_max yields a full-rank design")
    best_p, best = None, math.inf
    for p in sorted(table):
        if table[p] < best - 1e-12 * max(1.0, abs(best) if math.isfinite(best) else 1.0):
            best_p, best = p, table[p]
    return best_p


@dataclass(frozen=True)
class RDynRegFit:
    """Filtered regression ``pi(L) y = alpha* + beta pi(L) x + e``.

    ``alpha`` is ``alpha_star * theta(1)``.
    """

    beta: float
    alpha_star: float
    alpha: float
    se_beta: float
    sigma2: float
    loglik: float
    filter_P: int
    ols: OlsFit = field(repr=False)

    def test(self, null_value: float = 0.0) -> TestResult:
        return make_test(self.beta, self.se_beta, null_value, Method.RDYNREG)


def fit_rdynreg(sample: RegressionSample, theta: MaPolynomial, tolerance: float = DEFAULT_TOLERANCE,
                max_lag: int = MAX_FILTER_LAG, filt=None) -> RDynRegFit:
    """Filter ``y`` and ``x`` by ``theta^-1`` (presample dropped) and fit by OLS."""
    filt = filt or invert(theta, tolerance, max_lag)
    if len(sample) <= filt.truncation_P + 10:
        raise ValueError(f"sample of {len(sample)} too short for filter lag {filt.truncation_P}")
    ys = filter_series(sample.y, filt)
    xs = filter_series(sample.x, filt)
    fit = ols_regress(ys, xs)
    cov = ols_cov(fit)
    se = math.sqrt(cov.m[1, 1] / fit.n)
    return RDynRegFit(
        beta=fit.beta,
        alpha_star=fit.alpha,
        alpha=fit.alpha * theta.at_one,
        se_beta=se,
        sigma2=fit.sigma2,
        loglik=fit.loglik,
        filter_P=filt.truncation_P,
        ols=fit,
    )


@dataclass(frozen=True)
class LrTest:
    lam: float
    df: int
    p_value: float

    @property
    def lambda_(self) -> float:
        return self.lam


def lr_test(static_fit: OlsFit, dyn_fit: DynRegFit) -> LrTest:
    """``lambda = n ln(sigma2_static / sigma2_dyn)`` against chi-square(2p)."""
    if static_fit.n != dyn_fit.n_effective or not np.array_equal(static_fit.y, dyn_fit.y):
        raise ValueError("static and dynamic fits use different samples; refit the static "
                         "model with DynRegFit.static_fit()")
    df = 2 * dyn_fit.p
    if dyn_fit.sigma2 <= 0:
        return LrTest(math.inf, df, 0.0)
    lam = dyn_fit.n_effective * math.log(static_fit.sigma2 / dyn_fit.sigma2)
    lam = max(lam, 0.0)  # nested least squares: negative values are rounding only
    p_value = 1.0 if df == 0 else float(stats.chi2.sf(lam, df))
    return LrTest(lam, df, p_value)


# --- estimation across methods -------------------------------------------------


@dataclass(frozen=True)
class EstimationReport:
    """Per-method tests on one sample plus DynReg diagnostics."""

    results: dict
    dynreg: DynRegFit | None = None
    rdynreg: RDynRegFit | None = None
    lr: LrTest | None = None
    errors: dict = field(default_factory=dict)


def estimate_methods(sample: RegressionSample, methods: Sequence = tuple(Method), *,
                     theta: MaPolynomial | None = None, p: int | None = None,
                     p_max: int = DEFAULT_P_MAX, hac: dict | None = None,
                     null_value: float | None = None, filt=None,
                     raise_errors: bool = True, keep_zero_se: bool = False) -> EstimationReport:
    """Test ``beta == null_value`` on one sample with each requested method.

    One OLS fit is shared by every OLS-based method. ``hac`` maps a method to
    a :class:`HacConfig`. ``p=None`` selects the DynReg order by BIC.
    With ``raise_errors=False`` per-method failures are collected in
    ``errors`` instead of propagating. With ``keep_zero_se=True`` a perfect fit
    (zero standard error) is reported with its estimate, ``se = 0`` and NaN
    ``t_stat``/``p_value`` instead of failing.
    """
    methods = [Method.parse(m) for m in methods]
    null_value = sample.design.null_beta if null_value is None else null_value
    hac = hac or {}
    results, errors = {}, {}
    dyn = rdyn = lr = None
    ols = None

    def run(method, fn):
        try:
            results[method] = fn()
        except ZeroStandardError as exc:
            if keep_zero_se:
                results[method] = TestResult(exc.estimate, 0.0, math.nan, exc.null_value, math.nan,
                                             False, method)
            elif raise_errors:
                raise
            else:
                errors[method] = exc
        except DynUipError as exc:
            if raise_errors:
                raise
            errors[method] = exc
        except ValueError as exc:
            if raise_errors:
                raise
            errors[method] = exc

    for method in methods:
        if method is Method.DYNREG:
            def _dyn():
                nonlocal dyn, lr
                order = select_p(sample, min(p_max, _feasible_p_max(len(sample)))) if p is None else p
                dyn = fit_dynreg(sample, order)
                lr = lr_test(dyn.static_fit(), dyn)
                return dyn.test(null_value)
            run(method, _dyn)
        elif method is Method.RDYNREG:
            if theta is None:
                raise ValueError("RDynReg requires an MA polynomial theta")

            def _rdyn():
                nonlocal rdyn
                rdyn = fit_rdynreg(sample, theta, filt=filt)
                return rdyn.test(null_value)
            run(method, _rdyn)
        else:
            def _ols(method=method):
                nonlocal ols
                if ols is None:
                    ols = ols_fit(sample)
                cfg = hac.get(method, HacConfig(method)) if method.is_hac else method
                cov = robust_cov(ols, cfg, sample.k)
                return t_test(ols, cov, 1, null_value)
            run(method, _ols)
    return EstimationReport(results, dyn, rdyn, lr, errors)


def _feasible_p_max(n: int) -> int:
    """Largest ``p`` with ``n - p >= 5 (2p + 2)``."""
    return max(0, (n - 10) // 11)


# --- rolling windows ----------------------------------------------------------


@dataclass(frozen=True)
class RollingPoint:
    """One window's estimate; ``status`` is ``"ok"`` or ``"gap"`` (with ``message``)."""

    start: np.datetime64
    end: np.datetime64
    estimate: float
    se: float
    lower: float
    upper: float
    status: str = "ok"
    message: str = ""


def rolling_estimate(windows: Iterable[RegressionSample], estimator: Callable | str | Method, *,
                     theta: MaPolynomial | None = None, **kwargs) -> list[RollingPoint]:
    """Estimate every window; failures become gap markers instead of exceptions.

    ``estimator`` is a :class:`Method` (or its name) or a callable mapping a
    sample to ``(estimate, se)``. Output order follows window order.
    """
    if not callable(estimator):
        method = Method.parse(estimator)
        filt = invert(theta) if method is Method.RDYNREG and theta is not None else None

        def estimator(w):
            rep = estimate_methods(w, [method], theta=theta, filt=filt, **kwargs)
            r = rep.results[method]
            return r.estimate, r.se

    out = []
    for w in windows:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NumericalWarning)
                est, se = estimator(w)
            if not (math.isfinite(est) and math.isfinite(se)):
                raise InfeasibleError("non-finite estimate")
            out.append(RollingPoint(w.start, w.end, est, se, est - 1.96 * se, est + 1.96 * se))
        except (DynUipError, ValueError, np.linalg.LinAlgError) as exc:
            nan = math.nan
            out.append(RollingPoint(w.start, w.end, nan, nan, nan, nan, "gap", str(exc)))
    return out
