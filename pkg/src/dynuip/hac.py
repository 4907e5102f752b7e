"""Long-run covariance estimators for OLS scores.

All estimators act on demeaned scores ``psi_t = x_t u_t`` (intercept column
included) and return ``Omega = Gamma_0 + sum_j w_j (Gamma_j + Gamma_j')`` with
``Gamma_j = n^-1 sum_t psi_t psi_{t-j}'``, except EWC which projects onto a
cosine basis.

* HH       truncated kernel, lags ``1..k-1`` (PSD repair by eigenvalue flooring)
* NW       Bartlett, ``w_j = 1 - j/(L+1)``
* ANDREWS  quadratic spectral, AR(1) plug-in bandwidth
* KV       Bartlett with bandwidth ``b n`` and fixed-b critical values
* EWC      equal-weighted cosine with ``B`` basis functions, t(B) inference
"""

from __future__ import annotations

import csv
import functools
import io
import math
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import NumericalWarning
from .ols_core import CovEstimate, Method, OlsFit, ols_cov

KV_TABLE_VERSION = 1
KV_B_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))
_FFT_LAG_THRESHOLD = 64


def _demean(scores) -> np.ndarray:
    psi = np.asarray(scores, dtype=float)
    if psi.ndim == 1:
        psi = psi[:, None]
    return psi - psi.mean(axis=0)


def autocovariances(psi: np.ndarray, max_lag: int) -> np.ndarray:
    """``Gamma_j`` for ``j = 0..max_lag`` as an array of shape (max_lag+1, q, q)."""
    n, q = psi.shape
    max_lag = min(max_lag, n - 1)
    if max_lag <= _FFT_LAG_THRESHOLD:
        out = np.empty((max_lag + 1, q, q))
        for j in range(max_lag + 1):
            out[j] = psi[j:].T @ psi[: n - j] / n
        return out
    size = 1 << int(np.ceil(np.log2(2 * n)))
    F = np.fft.rfft(psi, n=size, axis=0)
    # cross[j, a, b] = sum_t psi[t, a] psi[t - j, b]
    cross = np.fft.irfft(F[:, :, None] * np.conj(F[:, None, :]), n=size, axis=0)
    return cross[: max_lag + 1] / n


def _weighted_omega(psi: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``Gamma_0 + sum_{j>=1} weights[j-1] (Gamma_j + Gamma_j')``."""
    L = len(weights)
    G = autocovariances(psi, L)
    omega = G[0].copy()
    if L:
        w = np.asarray(weights, dtype=float)[: len(G) - 1]
        S = np.tensordot(w, G[1 : len(w) + 1], axes=1)
        omega += S + S.T
    return (omega + omega.T) / 2


def _psd_repair(omega: np.ndarray) -> tuple[np.ndarray, bool]:
    vals, vecs = np.linalg.eigh(omega)
    scale = max(abs(np.trace(omega)), np.finfo(float).tiny)
    if vals.min() >= -1e-12 * scale:
        return omega, False
    fixed = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return (fixed + fixed.T) / 2, True


@dataclass(frozen=True)
class HacConfig:
    """Options for :func:`robust_cov`.

    ``lag_override=-1`` requests the automatic Newey-West rule
    ``floor(4 (n/100)^(2/9))``; ``None`` uses the horizon ``k``.
    """

    method: Method = Method.NW
    lag_override: int | None = None
    ewc_B: int | None = None
    kv_b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if self.lag_override is not None and self.lag_override < -1:
            raise ValueError("lag_override must be >= 0 (or -1 for the automatic rule)")
        if self.ewc_B is not None and self.ewc_B < 1:
            raise ValueError("ewc_B must be >= 1")
        if not 0 < self.kv_b <= 1:
            raise ValueError("kv_b must lie in (0, 1]")


def omega_hh(scores, k: int) -> CovEstimate:
    """Hansen-Hodrick: unweighted autocovariances through lag ``k - 1``."""
    psi = _demean(scores)
    n = len(psi)
    if k < 1 or n <= k:
        raise ValueError(f"omega_hh needs k >= 1 and n > k (k={k}, n={n})")
    omega, repaired = _psd_repair(_weighted_omega(psi, np.ones(k - 1)))
    if repaired:
        warnings.warn("Hansen-Hodrick covariance was indefinite; negative eigenvalues floored at 0",
                      NumericalWarning, stacklevel=2)
    return CovEstimate(Method.HH, omega, bandwidth=k - 1, psd_repaired=repaired)


def nw_auto_lag(n: int) -> int:
    return int(math.floor(4 * (n / 100) ** (2 / 9)))


def omega_nw(scores, lag: int) -> CovEstimate:
    """Newey-West Bartlett estimator with truncation lag ``lag``."""
    psi = _demean(scores)
    n = len(psi)
    if not 0 <= lag < n:
        raise ValueError(f"lag must satisfy 0 <= lag < n (lag={lag}, n={n})")
    j = np.arange(1, lag + 1)
    omega = _weighted_omega(psi, 1 - j / (lag + 1))
    return CovEstimate(Method.NW, omega, bandwidth=lag)


def qs_kernel(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0
    z = 6 * np.pi * x[nz] / 5
    out[nz] = 25 / (12 * np.pi**2 * x[nz] ** 2) * (np.sin(z) / z - np.cos(z))
    return out


def andrews_bandwidth(psi: np.ndarray) -> float:
    """QS bandwidth ``1.3221 (alpha(2) n)^(1/5)`` from per-column AR(1) fits.

    Each column's AR(1) contribution enters with weight ``1 / sigma_a^4``,
    i.e. equal weights after standardising the columns, so

        alpha(2) = sum 4 rho^2 / (1 - rho)^8  /  sum 1 / (1 - rho)^4,

    which makes the bandwidth invariant to rescaling any single regressor.
    A degenerate fit (|rho| >= 0.999 or a column without variation) warns
    and returns the cap ``n - 1``; otherwise the bandwidth is at most ``n - 1``.
    """
    n, q = psi.shape
    cap = float(n - 1)
    num = den = 0.0
    degenerate = False
    for a in range(q):
        lag, cur = psi[:-1, a], psi[1:, a]
        ss = lag @ lag
        if ss <= 1e-300 or cur @ cur <= 1e-300:
            degenerate = True
            continue
        rho = (cur @ lag) / ss
        if not np.isfinite(rho) or abs(rho) >= 0.999:
            degenerate = True
            rho = float(np.clip(np.nan_to_num(rho, nan=0.999), -0.999, 0.999))
        num += 4 * rho**2 / (1 - rho) ** 8
        den += 1 / (1 - rho) ** 4
    if degenerate:
        warnings.warn("degenerate AR(1) plug-in in Andrews bandwidth; bandwidth capped",
                      NumericalWarning, stacklevel=3)
        return cap
    return float(min(1.3221 * (num / den * n) ** 0.2, cap))


def omega_andrews(scores) -> CovEstimate:
    """Andrews (1991) quadratic-spectral estimator with automatic bandwidth."""
    psi = _demean(scores)
    n = len(psi)
    if n < 10:
        raise ValueError(f"omega_andrews needs n >= 10, got {n}")
    bw = andrews_bandwidth(psi)
    j = np.arange(1, n)
    omega, repaired = _psd_repair(_weighted_omega(psi, qs_kernel(j / bw)))
    return CovEstimate(Method.ANDREWS, omega, bandwidth=bw, psd_repaired=repaired)


def bartlett_omega(psi: np.ndarray, M: float) -> np.ndarray:
    """Bartlett kernel with bandwidth ``M``: weights ``1 - j/M`` for ``j < M``."""
    n = len(psi)
    L = min(int(math.ceil(M)) - 1, n - 1)
    j = np.arange(1, L + 1)
    return _weighted_omega(psi, 1 - j / M)


def omega_kv(scores, b: float = 1.0, table: "KvTable | None" = None) -> CovEstimate:
    """Kiefer-Vogelsang fixed-b estimator (Bartlett, bandwidth ``b n``)."""
    if not 0 < b <= 1:
        raise ValueError("b must lie in (0, 1]")
    psi = _demean(scores)
    n = len(psi)
    M = b * n
    table = table or load_kv_table()
    return CovEstimate(Method.KV, bartlett_omega(psi, M), bandwidth=M,
                       critical_values=table.critical_values(b))


def ewc_default_B(n: int) -> int:
    return max(2, 2 * int(round(0.2 * n ** (2 / 3))))


def omega_ewc(scores, B: int | None = None) -> CovEstimate:
    """Equal-weighted cosine estimator; inference uses Student-t with ``B`` df."""
    psi = _demean(scores)
    n = len(psi)
    B = ewc_default_B(n) if B is None else int(B)
    if B < 1:
        raise ValueError("B must be >= 1")
    if B >= n:
        raise ValueError(f"B must be smaller than n (B={B}, n={n})")
    t = np.arange(1, n + 1)
    basis = np.sqrt(2 / n) * np.cos(np.pi * np.outer(np.arange(1, B + 1), t - 0.5) / n)
    lam = basis @ psi
    omega = lam.T @ lam / B
    return CovEstimate(Method.EWC, (omega + omega.T) / 2, bandwidth=B, df=float(B))


def robust_cov(fit: OlsFit, config, k: int) -> CovEstimate:
    """Sandwich covariance for an OLS fit with the estimator named by ``config``.

    ``config`` is a :class:`HacConfig` or anything :meth:`Method.parse` accepts.
    ``k`` is the forecast horizon (HH bands and the default NW lag).
    """
    if not isinstance(config, HacConfig):
        config = HacConfig(method=Method.parse(config))
    method = config.method
    if method is Method.OLS:
        return ols_cov(fit)
    psi = fit.scores
    if method is Method.HH:
        est = omega_hh(psi, k)
    elif method is Method.NW:
        lag = config.lag_override
        if lag is None:
            lag = k
        elif lag == -1:
            lag = nw_auto_lag(fit.n)
        est = omega_nw(psi, lag)
    elif method is Method.ANDREWS:
        est = omega_andrews(psi)
    elif method is Method.KV:
        est = omega_kv(psi, config.kv_b)
    elif method is Method.EWC:
        est = omega_ewc(psi, config.ewc_B)
    else:
        raise ValueError(f"{method.value} is not an OLS covariance estimator")
    return est.with_bread(fit.xtx_inv)


# --- fixed-b critical values -------------------------------------------------


@dataclass(frozen=True)
class KvTable:
    """Two-sided 5% and 1% fixed-b critical values for the Bartlett t-test."""

    b: tuple[float, ...]
    cv95: tuple[float, ...]
    cv99: tuple[float, ...]
    seed: int
    n_paths: int
    n_steps: int
    version: int = KV_TABLE_VERSION

    def critical_values(self, b: float) -> tuple[float, float]:
        """Interpolate linearly in ``b``; ``b -> 0`` meets the normal values."""
        from scipy import stats

        bs = np.concatenate([[0.0], self.b])
        c95 = np.concatenate([[stats.norm.ppf(0.975)], self.cv95])
        c99 = np.concatenate([[stats.norm.ppf(0.995)], self.cv99])
        if b > bs[-1] + 1e-12:
            raise ValueError(f"b={b} outside the tabulated range")
        return float(np.interp(b, bs, c95)), float(np.interp(b, bs, c99))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# kv fixed-b table version={self.version} seed={self.seed} "
                  f"paths={self.n_paths} steps={self.n_steps}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["b", "two_sided_95", "two_sided_99"])
        for row in zip(self.b, self.cv95, self.cv99):
            w.writerow([f"{row[0]:.1f}", f"{row[1]:.6f}", f"{row[2]:.6f}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "KvTable":
        lines = text.splitlines()
        meta = {}
        for part in lines[0].lstrip("#").split():
            if "=" in part:
                key, val = part.split("=", 1)
                meta[key] = int(val)
        rows = list(csv.DictReader(line for line in lines if not line.startswith("#")))
        return cls(
            b=tuple(float(r["b"]) for r in rows),
            cv95=tuple(float(r["two_sided_95"]) for r in rows),
            cv99=tuple(float(r["two_sided_99"]) for r in rows),
            seed=meta.get("seed", 0),
            n_paths=meta.get("paths", 0),
            n_steps=meta.get("steps", 0),
            version=meta.get("version", KV_TABLE_VERSION),
        )


def fixed_b_statistics(n_paths: int, n_steps: int, b_grid, seed: int, chunk: int = 1000) -> np.ndarray:
    """Simulate ``|t|`` for the Bartlett fixed-b statistic, shape (len(b_grid), n_paths).

    Each path draws ``n_steps`` iid normals: ``t = sqrt(n) mean / sqrt(Omega_b)``
    where ``Omega_b`` uses the partial-sum form of the Bartlett estimator,
    ``n Omega = (2/M) sum S_t^2 - (2/M) sum S_t S_{t+M}``
    with ``S`` the partial sums of the demeaned draws and ``M = b n``.
    """
    rng = np.random.default_rng(seed)
    n = n_steps
    Ms = [max(1, int(round(b * n))) for b in b_grid]
    out = np.empty((len(Ms), n_paths))
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        e = rng.standard_normal((m, n))
        mean = e.mean(axis=1)
        S = np.cumsum(e - mean[:, None], axis=1)[:, :-1]
        ss = np.einsum("ij,ij->i", S, S)
        for i, M in enumerate(Ms):
            lagged = np.einsum("ij,ij->i", S[:, : n - 1 - M], S[:, M:]) if M < n - 1 else 0.0
            omega = (2.0 / M) * (ss - lagged) / n
            out[i, done : done + m] = np.abs(np.sqrt(n) * mean / np.sqrt(omega))
        done += m
    return out


def simulate_kv_table(n_paths: int = 50_000, n_steps: int = 2_000, seed: int = 20_240_101,
                      b_grid=KV_B_GRID) -> KvTable:
    stats_ = fixed_b_statistics(n_paths, n_steps, b_grid, seed)
    q = np.quantile(stats_, [0.95, 0.99], axis=1)
    return KvTable(tuple(b_grid), tuple(q[0]), tuple(q[1]), seed, n_paths, n_steps)


@functools.lru_cache(maxsize=None)
def load_kv_table() -> KvTable:
    text = resources.files("dynuip").joinpath("data/kv_critical_values.csv").read_text(encoding="utf-8")
    return KvTable.from_csv(text)
