"""Monte Carlo size and power experiments for the UIP tests.

The forecast errors are the overlap MA process ``u`` (default: 22-day
contracts sampled weekly). Under the Hansen-Hodrick design the forward rate
is built so that the forecast error ``e_t = s_t - f_{t-k}`` obeys

    e_t = beta e_{t-k} + u_t,        f_t = s_{t+k} - e_{t+k},

so the regression ``s_{t+k} - f_t = a + b (s_t - f_{t-k})`` has slope
``beta`` and error ``u_{t+k}``; ``beta = 0`` is rational expectations with
``f_t = s_{t+k} - u_{t+k}``. The spot path cancels from this regression, so
it can be synthetic or supplied.

Under the Fama design the forward premium ``x_t = f_t - s_t`` is an AR(1)
and ``s_{t+k} = s_t + beta x_t + u_{t+k}``, so ``beta = 1`` is the null and the
premium is strictly exogenous.

Replication ``r`` draws from ``SeedSequence(seed, spawn_key=(r,))``: results
do not depend on execution order, and alternatives reuse the null draws.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import ConfigError, NumericalWarning
from .dynreg import DEFAULT_P_MAX, estimate_methods
from .maproc import MaPolynomial, OverlapSpec, invert, overlap_theta, simulate_ma
from .ols_core import ALL_METHODS, Method
from .series_io import AlignedSeries, Design, RegressionSample, build_sample

DEFAULT_ALTERNATIVES = (-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3)
BIAS_METHODS = (Method.OLS, Method.DYNREG, Method.RDYNREG)


@dataclass(frozen=True)
class McConfig:
    """Experiment settings.

    ``true_beta=None`` means the design's null (0 for HH, 1 for Fama).
    ``sigma2=None`` calibrates the innovation variance from the spot path so
    that ``Var(u)`` equals the variance of the ``k``-period spot change.
    ``spot`` optionally supplies a log spot path of length >= ``T + k``
    (Hansen-Hodrick design only).
    """

    T: int = 1941
    reps: int = 1000
    k: int = 5
    contract_days: int = 22
    days_per_period: int = 5
    theta: tuple | None = None
    sigma2: float | None = None
    true_beta: float | None = None
    spot: tuple | None = field(default=None, repr=False)
    spot_sd: float = 0.014
    seed: int = 20_240_601
    design: Design = Design.HANSEN_HODRICK
    methods: tuple = ALL_METHODS
    p_max: int = DEFAULT_P_MAX
    premium_rho: float = 0.9
    premium_sd: float = 0.005
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "design", Design.parse(self.design))
        object.__setattr__(self, "methods", tuple(Method.parse(m) for m in self.methods))
        if self.theta is not None:
            object.__setattr__(self, "theta", tuple(float(c) for c in self.theta))
        if self.spot is not None:
            object.__setattr__(self, "spot", tuple(float(v) for v in self.spot))
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.T <= 50:
            raise ConfigError("T must exceed 50")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.sigma2 is not None and not self.sigma2 >= 0:
            raise ConfigError("sigma2 must be >= 0")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not -1 < self.premium_rho < 1:
            raise ConfigError("premium_rho must lie in (-1, 1)")
        if self.spot is not None:
            if self.design is not Design.HANSEN_HODRICK:
                raise ConfigError("a supplied spot path is only used by the Hansen-Hodrick design")
            if len(self.spot) < self.T + self.k:
                raise ConfigError(f"spot series has {len(self.spot)} points; need T + k = {self.T + self.k}")
        if self.theta_poly.order >= self.k:
            warnings.warn(
                f"MA order {self.theta_poly.order} >= horizon k={self.k}: the error overlaps the "
                "regressor and the null slope is not zero", NumericalWarning, stacklevel=3)

    @property
    def theta_poly(self) -> MaPolynomial:
        if self.theta is not None:
            return MaPolynomial(np.array(self.theta))
        return _overlap_theta(self.contract_days, self.days_per_period)

    @property
    def beta0(self) -> float:
        return self.design.null_beta if self.true_beta is None else float(self.true_beta)

    def replace(self, **changes) -> "McConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["design"] = self.design.value
        d["methods"] = [m.value for m in self.methods]
        d["theta"] = list(self.theta_poly.coeffs)
        d["spot"] = "supplied" if self.spot is not None else "synthetic"
        d["sigma2"] = calibrated_sigma2(self)
        return d


@functools.lru_cache(maxsize=32)
def _overlap_theta(contract_days: int, days_per_period: int) -> MaPolynomial:
    return overlap_theta(OverlapSpec(contract_days, days_per_period))


def replication_rng(seed: int, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep_index,)))


def _spot_path(config: McConfig, rng, n: int) -> np.ndarray:
    if config.spot is not None:
        return np.asarray(config.spot[:n], dtype=float)
    return np.cumsum(rng.normal(0.0, config.spot_sd, n))


def calibrated_sigma2(config: McConfig) -> float:
    """Innovation variance: given, or ``Var(s_{t+k} - s_t) / sum c_j^2`` on the pilot spot.

    The pilot is the supplied spot path or, for synthetic spots, the
    analytic ``k spot_sd^2`` of the random walk.
    """
    if config.sigma2 is not None:
        return float(config.sigma2)
    if config.spot is not None:
        s = np.asarray(config.spot)
        var_u = float(np.var(s[config.k:] - s[: -config.k]))
    else:
        var_u = config.k * config.spot_sd**2
    return var_u / config.theta_poly.variance_ratio


def _lag_k_ar(v: np.ndarray, coef: float, k: int) -> np.ndarray:
    """``out_t = coef * out_{t-k} + v_t`` with zero presample."""
    if coef == 0.0:
        return v.copy()
    a = np.zeros(k + 1)
    a[0], a[k] = 1.0, -coef
    return signal.lfilter([1.0], a, v)


def generate_replication(config: McConfig, rep_index: int, beta: float | None = None,
                         sigma2: float | None = None) -> RegressionSample:
    """Sample for replication ``rep_index`` with slope ``beta`` (default ``config.beta0``)."""
    beta = config.beta0 if beta is None else float(beta)
    sigma2 = calibrated_sigma2(config) if sigma2 is None else sigma2
    theta = config.theta_poly
    theta = MaPolynomial(theta.coeffs, sigma2)
    k, T = config.k, config.T
    rng = replication_rng(config.seed, rep_index)
    burn = 50 * k
    u = simulate_ma(theta, T + k + burn, rng)
    dates = np.datetime64("2000-01-06") + 7 * np.arange(T)

    if config.design is Design.HANSEN_HODRICK:
        s = _spot_path(config, rng, T + k)
        e = _lag_k_ar(u, beta, k)
        e = e[burn:]
        f = s[k : T + k] - e[k : T + k]
        series = AlignedSeries(dates, s[:T], f, k)
    else:
        sd0 = config.premium_sd / math.sqrt(1 - config.premium_rho**2)
        shocks = rng.normal(0.0, config.premium_sd, T + burn)
        x = signal.lfilter([1.0], [1.0, -config.premium_rho], shocks,
                           zi=[config.premium_rho * rng.normal(0.0, sd0)])[0][burn:]
        # s_t = s_{t-k} + w_t: k interleaved random walks started from a spot random walk
        w = np.empty(T + k)
        w[:k] = np.cumsum(rng.normal(0.0, config.spot_sd, k))
        w[k:] = beta * x + u[burn + k :]
        s = _lag_k_ar(w, 1.0, k)
        series = AlignedSeries(dates, s[:T], s[:T] + x, k)
    return build_sample(series, config.design)


# --- experiment ----------------------------------------------------------------


@dataclass(frozen=True)
class MethodRecord:
    method: Method
    bias: float | None
    mse: float | None
    size_5pct: float
    mc_se: float
    critical_value: float
    reps_used: int


@dataclass
class McResult:
    """Aggregated experiment output.

    ``estimates`` and ``t_stats`` have one entry per replication in index
    order (NaN where the method failed). ``power_grid`` maps a method to its
    size-corrected rejection rates at ``alternatives``.
    """

    config: McConfig
    records: dict
    estimates: dict
    t_stats: dict
    reps_used: int
    alternatives: tuple = ()
    power_grid: dict = field(default_factory=dict)
    power_mc_se: dict = field(default_factory=dict)

    @property
    def critical_values(self) -> dict:
        return {m: r.critical_value for m, r in self.records.items()}

    def record(self, method) -> MethodRecord:
        return self.records[Method.parse(method)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "metric", "value"])
        for method in self.records:
            r = self.records[method]
            for metric in ("bias", "mse", "size_5pct", "mc_se", "critical_value", "reps_used"):
                w.writerow([method.value, metric, fmt(getattr(r, metric))])
            for beta, rate in zip(self.alternatives, self.power_grid.get(method, ())):
                w.writerow([method.value, f"power@{fmt(beta)}", fmt(rate)])
        return buf.getvalue()

    def to_json(self) -> str:
        summary = {
            "config": self.config.to_dict(),
            "reps_used": self.reps_used,
            "methods": {
                m.value: {k: (v.value if isinstance(v, Method) else v)
                          for k, v in dataclasses.asdict(r).items()}
                for m, r in self.records.items()
            },
        }
        if self.alternatives:
            summary["alternatives"] = list(self.alternatives)
            summary["power"] = {m.value: list(v) for m, v in self.power_grid.items()}
        return json.dumps(summary, indent=2, sort_keys=True, default=_json_default)


def fmt(value) -> str:
    """Six significant digits; blanks for missing values."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.6g}"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def _run_block(config: McConfig, indices, beta: float, sigma2: float):
    theta = config.theta_poly
    filt = invert(theta) if Method.RDYNREG in config.methods else None
    null = config.design.null_beta
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalWarning)
        for r in indices:
            sample = generate_replication(config, r, beta, sigma2)
            rep = estimate_methods(sample, config.methods, theta=theta, p_max=config.p_max,
                                   null_value=null, filt=filt, raise_errors=False,
                                   keep_zero_se=True)
            row = []
            for m in config.methods:
                res = rep.results.get(m)
                row.append((res.estimate, res.t_stat, float(res.reject_at_5pct)) if res
                           else (math.nan, math.nan, math.nan))
            out.append(row)
    return out


def _simulate(config: McConfig, beta: float):
    """Estimates, t-statistics and 5% rejections, each (reps, n_methods), in replication order."""
    sigma2 = calibrated_sigma2(config)
    idx = list(range(config.reps))
    if config.workers == 1 or config.reps < 2 * config.workers:
        rows = _run_block(config, idx, beta, sigma2)
    else:
        chunks = [idx[i :: config.workers] for i in range(config.workers)]
        with ProcessPoolExecutor(config.workers) as pool:
            parts = list(pool.map(_run_block, [config] * len(chunks), chunks,
                                  [beta] * len(chunks), [sigma2] * len(chunks)))
        rows = [None] * config.reps
        for chunk, part in zip(chunks, parts):
            for r, row in zip(chunk, part):
                rows[r] = row
    arr = np.array(rows, dtype=float).reshape(config.reps, len(config.methods), 3)
    return arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]


def _critical_value(abs_t: np.ndarray) -> float:
    ok = abs_t[np.isfinite(abs_t)]
    return float(np.quantile(ok, 0.95)) if ok.size else math.nan


def run_experiment(config: McConfig) -> McResult:
    """Run every configured method on ``config.reps`` replications at ``config.beta0``.

    Size is the rejection rate of the two-sided 5% test of the design's null
    slope. Bias and MSE (against ``config.beta0``) are reported for OLS,
    DynReg and RDynReg only, since the HAC methods share the OLS estimate.
    """
    est, tst, rej = _simulate(config, config.beta0)
    records, estimates, t_stats = {}, {}, {}
    for j, m in enumerate(config.methods):
        e, t = est[:, j], tst[:, j]
        ok = np.isfinite(t)
        n_ok = int(ok.sum())
        size = float(rej[ok, j].mean()) if n_ok else math.nan
        bias = mse = None
        fin = np.isfinite(e)
        if m in BIAS_METHODS and fin.any():
            d = e[fin] - config.beta0
            bias = float(d.mean())
            mse = float(np.mean(d * d))
        records[m] = MethodRecord(m, bias, mse, size,
                                  math.sqrt(size * (1 - size) / n_ok) if n_ok else math.nan,
                                  _critical_value(np.abs(t)), n_ok)
        estimates[m] = e
        t_stats[m] = t
    return McResult(config, records, estimates, t_stats, config.reps)


def size_corrected_power(config: McConfig, alternatives=DEFAULT_ALTERNATIVES,
                         null_result: McResult | None = None) -> McResult:
    """Rejection rates at ``alternatives`` using each method's empirical null critical value.

    The critical value is the 95% quantile of ``|t|`` from ``null_result`` (run on
    demand at the design's null). Alternatives are slopes ``beta``; every
    alternative reuses the null's per-replication random draws.
    """
    alternatives = tuple(float(b) for b in alternatives)
    if not alternatives:
        raise ValueError("alternatives must not be empty")
    null_cfg = config.replace(true_beta=config.design.null_beta)
    null_result = null_result or run_experiment(null_cfg)
    cvs = null_result.critical_values
    grid = {m: [] for m in config.methods}
    mcse = {m: [] for m in config.methods}
    for beta in alternatives:
        if beta == config.design.null_beta:
            tst = np.column_stack([null_result.t_stats[m] for m in config.methods])
        else:
            _, tst, _ = _simulate(config, beta)
        for j, m in enumerate(config.methods):
            t = tst[:, j]
            ok = np.isfinite(t)
            rate = float(np.mean(np.abs(t[ok]) > cvs[m])) if ok.any() else math.nan
            grid[m].append(rate)
            mcse[m].append(math.sqrt(rate * (1 - rate) / max(int(ok.sum()), 1)))
    return McResult(null_result.config, null_result.records, null_result.estimates,
                    null_result.t_stats, null_result.reps_used, alternatives, grid, mcse)
