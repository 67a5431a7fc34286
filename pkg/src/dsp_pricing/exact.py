"""Exact expected pickup counts for packages on a line or a circle.

With ``S_i = F(1) + ... + F(i)`` the expected number of packages still
waiting on a line of ``n`` locations is the exponential mixture

    R(t, n) = sum_i gamma[n, i] * exp(-lam * S_i * t),

and on a circle

    n - C(t, n) = sum_{i<n} gamma_tilde[n, i] * exp(-lam * S_i * t)
                  + gamma_tilde[n, n] * exp(-lam * n * F(n) * t).

The coefficients do not depend on ``lam`` or ``t``, so a table is built
once per pmf and evaluated many times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bundle import BundlePmf
from .errors import CapExceededError, DomainError

DEFAULT_CAP = 2000


@dataclass(frozen=True)
class ExpectationQuery:
    t: float
    n: int
    lam: float

    def __post_init__(self):
        if not (self.t >= 0 and math.isfinite(self.t)):
            raise DomainError(f"t must be finite and >= 0, got {self.t}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise DomainError(f"lambda must be finite and >= 0, got {self.lam}")


@dataclass(frozen=True, eq=False)
class GammaTable:
    """Triangular coefficient tables for one pmf.

    ``gamma[n, i]`` and ``gamma_tilde[n, i]`` are stored for
    ``1 <= i <= n <= n_max``; row and column 0 are unused zeros.
    ``cdf[j] = F(j)`` and ``cum_cdf[i] = S_i`` for ``0 <= j, i <= n_max``.
    """

    pmf: BundlePmf
    n_max: int
    gamma: np.ndarray
    gamma_tilde: np.ndarray
    cdf: np.ndarray
    cum_cdf: np.ndarray

    def _check_n(self, n: int):
        if n > self.n_max:
            raise CapExceededError(f"n={n} exceeds table size n_max={self.n_max}")

    def remaining_line(self, t: float, n: int, lam: float) -> float:
        self._check_n(n)
        if self.cum_cdf[n] == 0.0:
            return float(n)
        rates = self.cum_cdf[1:n + 1]
        terms = self.gamma[n, 1:n + 1] * np.exp(-lam * t * rates)
        return math.fsum(terms)

    def remaining_line_all(self, t: float, n: int, lam: float) -> np.ndarray:
        """``[R(t, 0), R(t, 1), ..., R(t, n)]`` in one pass."""
        self._check_n(n)
        e = np.exp(-lam * t * self.cum_cdf[1:n + 1])
        out = np.zeros(n + 1)
        for k in range(1, n + 1):
            out[k] = math.fsum(self.gamma[k, 1:k + 1] * e[:k]) if self.cum_cdf[k] > 0 else k
        return out

    def remaining_circle(self, t: float, n: int, lam: float) -> float:
        self._check_n(n)
        if self.cdf[n] == 0.0:
            return float(n)
        terms = self.gamma_tilde[n, 1:n] * np.exp(-lam * t * self.cum_cdf[1:n])
        last = self.gamma_tilde[n, n] * math.exp(-lam * t * n * self.cdf[n])
        return math.fsum(np.append(terms, last))

    def pickups_circle(self, t: float, n: int, lam: float) -> float:
        return n - self.remaining_circle(t, n, lam)


def build_gamma(F: BundlePmf, n_max: int, cap: int = DEFAULT_CAP) -> GammaTable:
    """Build the line and circle coefficient tables up to ``n_max``.

    Row ``n`` of ``gamma`` follows from rows ``< n``:
    ``gamma[n, i] = 2 * sum_j F(j) gamma[n-j, i] / (S_n - S_i)`` for
    ``i < n`` and ``gamma[n, n] = n - sum_{i<n} gamma[n, i]``; rows with
    ``F(n) = 0`` are all ones.  The inner sum is accumulated from running
    column sums, so building costs O(n_max**2 * m).

    The circle table uses ``gamma_tilde[n, i] = sum_k f(k) gamma[n-k, i] /
    (F(n) - S_i / n)``.  For ``n >= m`` this is the usual ``1 - S_i / n``
    denominator; for ``n < m`` bundles larger than the circle are rejected.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    if n_max > cap:
        raise CapExceededError(f"n_max={n_max} exceeds the stability cap {cap}")
    m = F.m
    Fc = F.cdf_array(n_max)
    S = np.cumsum(Fc)
    f = F.pmf_array()
    size = n_max + 1
    gamma = np.zeros((size, size))
    colsum = np.zeros((size, size))  # colsum[k] = gamma[1] + ... + gamma[k]
    for n in range(1, size):
        if Fc[n] == 0.0:
            gamma[n, 1:n + 1] = 1.0
        else:
            # F(n - l) == 1 for l <= n - m, so those rows enter through colsum
            acc = colsum[n - m].copy() if n - m >= 1 else np.zeros(size)
            for l in range(max(1, n - m + 1), n):
                acc += Fc[n - l] * gamma[l]
            denom = S[n] - S[1:n]
            assert np.all(denom > 0)
            gamma[n, 1:n] = 2.0 * acc[1:n] / denom
            gamma[n, n] = n - math.fsum(gamma[n, 1:n])
        colsum[n] = colsum[n - 1] + gamma[n]
    del colsum

    gamma_tilde = np.zeros((size, size))
    for n in range(1, size):
        if Fc[n] == 0.0:
            gamma_tilde[n, n] = n
            continue
        acc = np.zeros(size)
        for k in range(1, min(m, n - 1) + 1):
            acc += f[k] * gamma[n - k]
        denom = Fc[n] - S[1:n] / n
        assert np.all(denom > 0)
        gamma_tilde[n, 1:n] = acc[1:n] / denom
        gamma_tilde[n, n] = n - math.fsum(gamma_tilde[n, 1:n])

    for arr in (gamma, gamma_tilde, Fc, S):
        arr.setflags(write=False)
    return GammaTable(pmf=F, n_max=n_max, gamma=gamma, gamma_tilde=gamma_tilde, cdf=Fc, cum_cdf=S)


@lru_cache(maxsize=16)
def _cached_table(probs: tuple[float, ...], n_max: int, cap: int) -> GammaTable:
    return build_gamma(BundlePmf(probs), n_max, cap)


def get_table(F: BundlePmf, n_max: int, cap: int = DEFAULT_CAP) -> GammaTable:
    """Cached :func:`build_gamma`, keyed on the pmf values and ``n_max``."""
    return _cached_table(F.key(), int(n_max), int(cap))


def expected_remaining_line(q: ExpectationQuery, tab: GammaTable) -> float:
    """R(t, n, lam): expected packages left on a line of ``n`` at time ``t``."""
    return tab.remaining_line(q.t, q.n, q.lam)


def expected_pickups_line(q: ExpectationQuery, tab: GammaTable) -> float:
    """K(t, n, lam) = n - R(t, n, lam)."""
    return q.n - tab.remaining_line(q.t, q.n, q.lam)


def expected_pickups_circle(q: ExpectationQuery, tab: GammaTable, strict: bool = False) -> float:
    """C(t, n, lam): expected pickups by time ``t`` on a circle of ``n``.

    With ``strict=True`` circles smaller than the largest bundle are refused
    instead of using the extension that rejects oversized bundles.
    """
    if strict and q.n < tab.pmf.m:
        raise DomainError(f"circle formula needs n >= m ({q.n} < {tab.pmf.m})")
    return tab.pickups_circle(q.t, q.n, q.lam)


def ode_rhs(q: ExpectationQuery, tab: GammaTable) -> float:
    """Right-hand side of the line recursion, without the ``lam`` factor."""
    R = tab.remaining_line_all(q.t, q.n, q.lam)
    n = q.n
    Fc = tab.cdf
    coupling = math.fsum(Fc[n - i] * R[i] for i in range(1, n))
    return -tab.cum_cdf[n] * R[n] + 2.0 * coupling


def ode_residual(q: ExpectationQuery, tab: GammaTable, h: float = 1e-4) -> float:
    """|central-difference dR/dt - lam * rhs| at ``(t, n)``."""
    if not 0 < h < q.t:
        raise DomainError(f"need 0 < h < t, got h={h}, t={q.t}")
    up = tab.remaining_line(q.t + h, q.n, q.lam)
    down = tab.remaining_line(q.t - h, q.n, q.lam)
    deriv = (up - down) / (2.0 * h)
    return abs(deriv - q.lam * ode_rhs(q, tab))


def spot_validate(tab: GammaTable, lam: float, t: float, reps: int = 4000, seed: int = 0,
                  z_tol: float = 4.0, sizes=None) -> list[dict]:
    """Compare circle values against Monte Carlo at a few table sizes.

    Defaults to ``n in {n_max/4, n_max/2, n_max}``.  Each row reports the
    exact value, the simulated mean and standard error, and whether the
    gap is within ``z_tol`` standard errors.
    """
    from .simulate import mc_expected_pickups

    if sizes is None:
        sizes = sorted({max(1, tab.n_max // 4), max(1, tab.n_max // 2), tab.n_max})
    rows = []
    for n in sizes:
        exact = tab.pickups_circle(t, n, lam)
        mean, se = mc_expected_pickups(n, lam, tab.pmf, t, reps, seed + n)
        gap = abs(mean - exact)
        rows.append({"n": n, "exact": exact, "mc_mean": mean, "mc_stderr": se,
                     "ok": gap <= z_tol * se + 1e-9 * max(1, n)})
    return rows
