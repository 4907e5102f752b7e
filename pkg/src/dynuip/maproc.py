"""Moving-average error algebra for overlapping forecast errors.

A forward contract of ``contract_days`` sampled every ``days_per_period``
days produces forecast errors whose autocorrelations fall linearly,
``rho_j = max(0, D - j d) / D``. This module turns such autocorrelations
into the unique invertible MA polynomial ``theta(L) = 1 + c_1 L + ... +
c_m L^m`` (sign convention: plus signs, coefficients stored as estimated),
inverts it into the AR filter ``pi(L) = theta(L)^-1`` and simulates the
process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as poly

from .errors import InfeasibleError

INVERTIBILITY_MARGIN = 1e-8
UNIT_CIRCLE_TOL = 1e-7
DEFAULT_TOLERANCE = 1e-6
MAX_FILTER_LAG = 50


@dataclass(frozen=True)
class OverlapSpec:
    """Contract length and sampling interval, both in calendar days."""

    contract_days: int = 22
    days_per_period: int = 5

    def __post_init__(self):
        if self.contract_days <= 0 or self.days_per_period <= 0:
            raise ValueError("contract_days and days_per_period must be positive")

    @property
    def ma_order(self) -> int:
        """Largest ``j`` with ``rho_j > 0``."""
        return -(-self.contract_days // self.days_per_period) - 1

    @property
    def horizon(self) -> int:
        """Regression horizon ``k`` for which the errors are MA(k-1)."""
        return self.ma_order + 1


def overlap_autocorrelations(spec: OverlapSpec) -> np.ndarray:
    """``rho_1 .. rho_J`` with ``J = ceil(D/d)``; the last entry is always 0."""
    D, d = spec.contract_days, spec.days_per_period
    J = -(-D // d)
    j = np.arange(1, J + 1)
    return np.maximum(0, D - j * d) / D


@dataclass(frozen=True)
class MaPolynomial:
    """Invertible MA polynomial with ``coeffs[0] == 1`` and innovation variance.

    Construction fails with :class:`InfeasibleError` when a root of
    ``theta(z)`` lies on or inside the unit circle.
    """

    coeffs: np.ndarray
    sigma2: float = 1.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size == 0 or c[0] != 1.0:
            raise ValueError("MA coefficients must start with c_0 = 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("MA coefficients must be finite")
        if not (self.sigma2 >= 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be finite and >= 0, got {self.sigma2}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        r = self.roots
        if r.size and np.min(np.abs(r)) <= 1 + INVERTIBILITY_MARGIN:
            raise InfeasibleError(
                f"MA polynomial is not invertible: smallest root modulus {np.min(np.abs(r)):.10g}"
            )

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def roots(self) -> np.ndarray:
        c = np.trim_zeros(self.coeffs, "b")
        if len(c) <= 1:
            return np.empty(0, dtype=complex)
        return poly.polyroots(c)

    @property
    def variance_ratio(self) -> float:
        """``sum c_j^2``, the ratio ``Var(u) / sigma2``."""
        return float(self.coeffs @ self.coeffs)

    @property
    def at_one(self) -> float:
        """``theta(1)``."""
        return float(self.coeffs.sum())

    def autocovariances(self) -> np.ndarray:
        c = self.coeffs
        m = self.order
        return self.sigma2 * np.array([c[: m + 1 - j] @ c[j:] for j in range(m + 1)])

    def autocorrelations(self) -> np.ndarray:
        """``rho_1 .. rho_m`` implied by the coefficients."""
        c = self.coeffs
        m = self.order
        return np.array([c[: m + 1 - j] @ c[j:] for j in range(1, m + 1)]) / (c @ c)


@dataclass(frozen=True)
class ArFilter:
    """Truncated inverse ``pi(L) = b_0 + b_1 L + ... + b_P L^P``.

    ``truncation_error`` is the absolute tail ``sum_{j > P} |b_j|``;
    ``capped`` records that the lag cap was hit before the tolerance.
    """

    weights: np.ndarray
    truncation_P: int
    truncation_error: float
    capped: bool = False

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def _newton_polish(series: np.ndarray, root: complex, steps: int = 3) -> complex:
    d = cheb.chebder(series)
    for _ in range(steps):
        fd = cheb.chebval(root, d)
        if fd == 0:
            break
        step = cheb.chebval(root, series) / fd
        root = root - step
        if abs(step) < 1e-16 * max(1.0, abs(root)):
            break
    return root


def spectral_factorize(rho, m: int | None = None) -> MaPolynomial:
    """The unique invertible MA(m) whose autocorrelations equal ``rho``.

    With ``v = (z + 1/z) / 2`` the autocovariance generating function
    ``1 + sum_j rho_j (z^j + z^-j)`` becomes the Chebyshev series
    ``P(v) = 1 + sum_j 2 rho_j T_j(v)``. Each root ``v_i`` maps to the pair
    ``z = v_i +- sqrt(v_i^2 - 1)``; the member outside the unit circle is kept.
    A real root with ``|v_i| <= 1`` puts a zero of the spectrum on the unit
    circle, so no invertible MA(m) exists.

    ``sigma2`` of the result is the innovation variance per unit ``Var(u)``.
    Trailing zero autocorrelations are ignored; the coefficients are padded
    back to length ``m + 1`` with zeros.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if m is None:
        m = len(rho)
    if m < 0:
        raise ValueError("MA order must be >= 0")
    if np.any(np.abs(rho[m:]) > 1e-14):
        raise InfeasibleError(f"autocorrelations beyond lag {m} are nonzero; not an MA({m})")
    r = rho[:m]
    nz = np.flatnonzero(np.abs(r) > 1e-14)
    q = int(nz[-1]) + 1 if nz.size else 0
    coeffs = np.zeros(m + 1)
    coeffs[0] = 1.0
    if q == 0:
        return MaPolynomial(coeffs, 1.0)

    series = np.concatenate([[1.0], 2.0 * r[:q]])
    vroots = [_newton_polish(series, complex(v)) for v in cheb.chebroots(series)]
    zroots = []
    for v in vroots:
        if abs(v.imag) <= UNIT_CIRCLE_TOL and abs(v.real) <= 1 + UNIT_CIRCLE_TOL:
            raise InfeasibleError(
                f"autocorrelations {np.round(r[:q], 6).tolist()} put a spectral zero on the unit "
                f"circle (v = {v.real:.6g}); no invertible MA({q}) exists"
            )
        s = np.sqrt(v * v - 1)
        z = v + s if abs(v + s) > 1 else v - s
        zroots.append(z)
    # theta(L) = prod (1 - L / z_i), normalised so that c_0 = 1
    th = np.array([1.0 + 0j])
    for z in zroots:
        th = poly.polymul(th, [1.0, -1.0 / z])
    coeffs[: q + 1] = th.real
    c = coeffs
    return MaPolynomial(coeffs, 1.0 / float(c @ c))


def _inverse_weights(c: np.ndarray, n: int) -> np.ndarray:
    m = len(c) - 1
    b = np.zeros(n + 1)
    b[0] = 1.0
    for j in range(1, n + 1):
        lo = max(0, j - m)
        b[j] = -(c[j - lo : 0 : -1] @ b[lo:j]) if m else 0.0
    return b


def invert(theta, tolerance: float = DEFAULT_TOLERANCE, max_lag: int = MAX_FILTER_LAG) -> ArFilter:
    """Power-series inverse of ``theta(L)``, truncated at the smallest adequate lag.

    ``P`` is the smallest lag with ``|b_P| < tolerance`` whose remaining tail
    ``sum_{j > P} |b_j|`` is also below ``tolerance``, capped at ``max_lag``.
    The tail is summed from the exact recursion until its geometric envelope
    (rate ``1 / min |root|``) is below machine precision.
    """
    if not isinstance(theta, MaPolynomial):
        theta = MaPolynomial(theta)
    c = theta.coeffs
    roots = theta.roots
    if roots.size == 0 or np.allclose(c[1:], 0):
        return ArFilter(np.array([1.0]), 0, 0.0)
    rate = 1.0 / float(np.min(np.abs(roots)))
    # run far enough that rate**n is negligible, with a multiplicity allowance
    extra = int(math.ceil(math.log(1e-17) / math.log(rate))) + 4 * len(c)
    b = _inverse_weights(c, max_lag + extra)
    tails = np.cumsum(np.abs(b[::-1]))[::-1]  # tails[j] = sum_{i >= j} |b_i|
    P = max_lag
    for j in range(1, max_lag + 1):
        if abs(b[j]) < tolerance and tails[j + 1] < tolerance:
            P = j
            break
    capped = P == max_lag and not (abs(b[P]) < tolerance and tails[P + 1] < tolerance)
    return ArFilter(b[: P + 1].copy(), P, float(tails[P + 1]), capped)


def filter_series(series, filt: ArFilter) -> np.ndarray:
    """``out_t = sum_j b_j series_{t-j}`` for ``t >= P``; the presample is dropped."""
    x = np.asarray(series, dtype=float)
    P = filt.truncation_P
    if len(x) <= P:
        raise ValueError(f"series of length {len(x)} is not longer than the filter lag {P}")
    return np.convolve(x, filt.weights, mode="valid")


def simulate_ma(theta: MaPolynomial, n: int, rng) -> np.ndarray:
    """``n`` draws of ``u_t = sum_j c_j e_{t-j}`` with ``e ~ N(0, sigma2)``.

    ``rng`` must be a :class:`numpy.random.Generator` (or an integer seed); no
    global random state is touched.
    """
    if not isinstance(rng, np.random.Generator):
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(int(rng))
        else:
            raise TypeError("rng must be a numpy Generator or an integer seed")
    m = theta.order
    if n <= m:
        raise ValueError(f"n must exceed the MA order ({n} <= {m})")
    e = rng.standard_normal(n + m) * math.sqrt(theta.sigma2)
    return np.convolve(e, theta.coeffs, mode="valid")


def overlap_theta(spec: OverlapSpec | None = None) -> MaPolynomial:
    """Invertible MA polynomial implied by an overlap specification."""
    spec = spec or OverlapSpec()
    return spectral_factorize(overlap_autocorrelations(spec), spec.ma_order)
