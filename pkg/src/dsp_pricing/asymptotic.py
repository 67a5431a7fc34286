"""Limiting pickup fraction alpha(t, lam) as the number of packages grows.

alpha(t, lam) = 1 - int_{e^{-lam t}}^1 exp(2(phi(u) - phi(1))) qhat(t + ln(u)/lam, u) du
                  - (m - (m-1) e^{-lam t}) exp(2(phi(e^{-lam t}) - phi(1)) - lam t (m - phi'(1)))

``qhat`` only needs line values R(s, i) for i < m, so a table of size
``m - 1`` is enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bundle import BundlePmf, deterministic
from .errors import DomainError, QuadratureError
from .exact import GammaTable, get_table

DEFAULT_TOL = 1e-10


def adaptive_simpson(func, a: float, b: float, tol: float = DEFAULT_TOL, max_depth: int = 50,
                     min_depth: int = 4) -> tuple[float, float]:
    """Adaptive Simpson quadrature with Richardson correction.

    Returns ``(integral, error_estimate)``.  Raises :class:`QuadratureError`
    carrying the partial estimate if some panel hits ``max_depth`` first.
    """
    if a == b:
        return 0.0, 0.0
    fa, fb = func(a), func(b)
    mid = 0.5 * (a + b)
    fm = func(mid)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total, err, failed = [], [], False
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        c = 0.5 * (lo + hi)
        d, e = 0.5 * (lo + c), 0.5 * (c + hi)
        fd, fe = func(d), func(e)
        left = (c - lo) / 6.0 * (flo + 4.0 * fd + fmid)
        right = (hi - c) / 6.0 * (fmid + 4.0 * fe + fhi)
        delta = left + right - s
        if depth >= min_depth and (abs(delta) <= 15.0 * eps or depth >= max_depth):
            if abs(delta) > 15.0 * eps:
                failed = True
            total.append(left + right + delta / 15.0)
            err.append(abs(delta) / 15.0)
            continue
        stack.append((lo, c, flo, fd, fmid, left, 0.5 * eps, depth + 1))
        stack.append((c, hi, fmid, fe, fhi, right, 0.5 * eps, depth + 1))
    value, error = math.fsum(total), math.fsum(err)
    if failed:
        raise QuadratureError(f"adaptive Simpson did not reach tol={tol}", value, error)
    return value, error


@dataclass(frozen=True)
class AlphaQuery:
    t: float
    lam: float
    F: BundlePmf
    quad_tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"lambda must be > 0, got {self.lam}")
        if not self.t >= 0:
            raise DomainError(f"t must be >= 0, got {self.t}")
        if not 0 < self.quad_tol <= 1e-4:
            raise DomainError(f"quad_tol must be in (0, 1e-4], got {self.quad_tol}")


class _QHat:
    """Precomputed pieces of qhat for one pmf and rate."""

    def __init__(self, F: BundlePmf, tab: GammaTable, lam: float):
        m = F.m
        self.m = m
        self.lam = lam
        self.tab = tab
        self.dphi1 = F.phi_prime(1.0)
        ccdf = np.array([F.ccdf(j) for j in range(m)])  # index j = 0..m-1
        # weights[i-1, j-1] = ccdf(j) for m - i <= j <= m - 1, else 0
        w = np.zeros((max(m - 1, 0), max(m - 1, 0)))
        for i in range(1, m):
            for j in range(m - i, m):
                w[i - 1, j - 1] = ccdf[j]
        self.w = w
        self.ij = (np.arange(1, m)[:, None] + np.arange(1, m)[None, :]).astype(float)
        self.rates = tab.cum_cdf[1:m] if m > 1 else np.zeros(0)

    def line_values(self, s: float) -> np.ndarray:
        """[R(s, 1), ..., R(s, m-1)]."""
        m = self.m
        if m == 1:
            return np.zeros(0)
        e = np.exp(-self.lam * s * self.rates)
        g = self.tab.gamma[1:m, 1:m]
        return g @ e

    def __call__(self, s: float, v: float) -> float:
        if v < 0 or v > 1:
            raise DomainError(f"v must lie in [0, 1], got {v}")
        if self.m == 1 or v == 1.0:
            return 0.0
        R = self.line_values(max(s, 0.0))
        total_R = R.sum()
        first = 2.0 * _pow(v, self.m - self.dphi1 - 1.0) * (1.0 - v) * total_R
        powers = _pow(v, self.ij - self.dphi1 - 1.0)
        second = 2.0 * (1.0 - v) ** 2 * float(R @ (self.w * powers).sum(axis=1))
        return first - second


def _pow(v, e):
    # exponents here are >= 0 up to rounding; clip so 0**(-1e-16) stays finite
    return np.power(v, np.maximum(e, 0.0))


def q_hat(s: float, v: float, F: BundlePmf, tab: GammaTable | None = None, lam: float = 1.0) -> float:
    """The integrand factor qhat(s, v).

    ``lam`` only enters through R(s, i), which depends on ``lam * s``; it
    defaults to 1 so ``s`` can be read in units of ``1 / lam``.
    """
    if tab is None:
        tab = get_table(F, max(F.m - 1, 1))
    return _QHat(F, tab, lam)(s, v)


def alpha(q: AlphaQuery, tab: GammaTable | None = None, with_error: bool = False):
    """Limiting fraction of packages picked up by time ``t``.

    Returns ``alpha`` or, with ``with_error=True``, ``(alpha, quad_error)``.
    """
    F, lam, t = q.F, q.lam, q.t
    if tab is None:
        tab = get_table(F, max(F.m - 1, 1))
    m = F.m
    if t == 0:
        return (0.0, 0.0) if with_error else 0.0
    qh = _QHat(F, tab, lam)
    phi1 = F.phi(1.0)
    coeffs = F.phi_coefficients()
    lo = math.exp(-lam * t)

    def integrand(u):
        if u <= 0.0:
            return 0.0
        s = t + math.log(u) / lam
        ph = float(np.polyval(coeffs[::-1], u))
        return math.exp(2.0 * (ph - phi1)) * qh(s, u)

    if m == 1:
        integral, err = 0.0, 0.0
    else:
        integral, err = adaptive_simpson(integrand, lo, 1.0, q.quad_tol)
    boundary = (m - (m - 1) * lo) * math.exp(2.0 * (F.phi(lo) - phi1) - lam * t * (m - q.F.phi_prime(1.0)))
    value = 1.0 - integral - boundary
    value = min(1.0, max(0.0, value)) if -1e-9 <= value <= 1 + 1e-9 else value
    return (value, err) if with_error else value


def alpha_pinsky(m: int, quad_tol: float = DEFAULT_TOL) -> float:
    """Closed-form limit for bundles of fixed size ``m``.

    ``m * int_0^1 exp(2 (phi(u) - phi(1))) du`` with
    ``phi(u) = sum_{j<m} u**j / j``.
    """
    if m < 2:
        raise DomainError("the fixed-size formula needs m >= 2")
    F = deterministic(m)
    coeffs = F.phi_coefficients()[::-1]
    phi1 = F.phi(1.0)
    value, _ = adaptive_simpson(lambda u: math.exp(2.0 * (float(np.polyval(coeffs, u)) - phi1)),
                                0.0, 1.0, quad_tol)
    return m * value


def convergence_gap(t: float, lam: float, F: BundlePmf, n: int, tab: GammaTable | None = None,
                    quad_tol: float = DEFAULT_TOL) -> float:
    """``n * |C(t, n, lam) / n - alpha(t, lam)|``; bounded in ``n``."""
    if n < F.m:
        raise DomainError(f"need n >= m ({n} < {F.m})")
    if tab is None or tab.n_max < n:
        tab = get_table(F, n)
    if t == 0:
        return 0.0
    a = alpha(AlphaQuery(t, lam, F, quad_tol), tab)
    return abs(tab.pickups_circle(t, n, lam) - n * a)
