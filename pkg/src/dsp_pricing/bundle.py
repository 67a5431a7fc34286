"""Bundle-size distributions on {1, ..., m}.

A driver's request asks for ``k`` consecutive packages, with ``k`` drawn
from a finite distribution.  Everything downstream (coefficient tables,
the limiting pickup fraction, prices) only needs the pmf, its CDF and the
generating polynomial ``phi(y) = sum_{i<m} ccdf(i) / i * y**i``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidDistributionError

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class BundlePmf:
    """Probability mass function of the bundle size.

    ``probs[k - 1]`` is ``P(B = k)``; the last entry is strictly positive so
    ``m == len(probs)`` is the largest size with positive mass.
    """

    probs: tuple[float, ...]
    label: str = field(default="", compare=False)

    def __post_init__(self):
        p = self.probs
        if len(p) < 1:
            raise InvalidDistributionError("bundle pmf needs at least one entry")
        if any(not math.isfinite(x) or x < 0 for x in p):
            raise InvalidDistributionError("bundle pmf entries must be finite and nonnegative")
        if abs(math.fsum(p) - 1.0) > _SUM_TOL:
            raise InvalidDistributionError(f"bundle pmf sums to {math.fsum(p)!r}, not 1")
        if p[-1] <= 0:
            raise InvalidDistributionError("last pmf entry must be positive (trim trailing zeros)")

    @property
    def m(self) -> int:
        return len(self.probs)

    def f(self, k: int) -> float:
        return self.probs[k - 1] if 1 <= k <= self.m else 0.0

    def cdf(self, k: int) -> float:
        if k < 1:
            return 0.0
        if k >= self.m:
            return 1.0
        return min(1.0, math.fsum(self.probs[:k]))

    def ccdf(self, k: int) -> float:
        return 1.0 - self.cdf(k)

    @property
    def mean(self) -> float:
        return math.fsum(k * p for k, p in enumerate(self.probs, start=1))

    def pmf_array(self) -> np.ndarray:
        """Array ``a`` with ``a[k] = P(B = k)`` for ``k = 0..m`` (``a[0] = 0``)."""
        return np.concatenate(([0.0], np.asarray(self.probs, dtype=float)))

    def cdf_array(self, n: int) -> np.ndarray:
        """Array ``F`` with ``F[j] = P(B <= j)`` for ``j = 0..n``."""
        out = np.ones(n + 1)
        out[0] = 0.0
        c = np.minimum(np.cumsum(self.probs), 1.0)
        k = min(n, self.m - 1)
        out[1:k + 1] = c[:k]
        return out

    def phi_coefficients(self) -> np.ndarray:
        """Coefficients ``c[i] = ccdf(i) / i`` of ``y**i`` for ``i = 0..m-1``."""
        c = np.zeros(self.m)
        for i in range(1, self.m):
            c[i] = self.ccdf(i) / i
        return c

    def phi(self, y: float) -> float:
        return _horner(self.phi_coefficients(), y)

    def phi_prime(self, y: float) -> float:
        c = self.phi_coefficients()
        return _horner(c[1:] * np.arange(1, self.m), y)

    def phi_second(self, y: float) -> float:
        c = self.phi_coefficients()
        if self.m < 3:
            return 0.0
        i = np.arange(2, self.m)
        return _horner(c[2:] * i * (i - 1), y)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.choice(np.arange(1, self.m + 1), size=size, p=np.asarray(self.probs))

    def key(self) -> tuple[float, ...]:
        return self.probs


def _horner(coeffs: Sequence[float], y: float) -> float:
    acc = 0.0
    for c in reversed(list(coeffs)):
        acc = acc * y + c
    return float(acc)


def make_pmf(weights: Sequence[float], label: str = "") -> BundlePmf:
    """Normalize nonnegative weights on sizes 1, 2, ... into a pmf.

    Trailing zero weights are dropped so that the support maximum is exact.
    """
    w = [float(x) for x in weights]
    if any(not math.isfinite(x) or x < 0 for x in w):
        raise InvalidDistributionError("weights must be finite and nonnegative")
    while w and w[-1] == 0.0:
        w.pop()
    total = math.fsum(w)
    if not w or total <= 0:
        raise InvalidDistributionError("at least one weight must be positive")
    probs = [x / total for x in w]
    # renormalize once more so the stored pmf sums to 1 to rounding
    s = math.fsum(probs)
    probs = [x / s for x in probs]
    return BundlePmf(tuple(probs), label=label)


def deterministic(m: int) -> BundlePmf:
    if m < 1:
        raise InvalidDistributionError("bundle size must be >= 1")
    return make_pmf([0.0] * (m - 1) + [1.0], label=f"det:{m}")


def uniform(a: int, b: int) -> BundlePmf:
    if not 1 <= a <= b:
        raise InvalidDistributionError(f"need 1 <= a <= b, got {a}..{b}")
    return make_pmf([0.0] * (a - 1) + [1.0] * (b - a + 1), label=f"uniform:{a}..{b}")


def truncated_poisson(mean: float, max_size: int) -> BundlePmf:
    """Poisson(mean) conditioned on {1, ..., max_size}."""
    if mean <= 0 or max_size < 1:
        raise InvalidDistributionError("truncated Poisson needs mean > 0 and max >= 1")
    logw = [k * math.log(mean) - math.lgamma(k + 1) for k in range(1, max_size + 1)]
    top = max(logw)
    return make_pmf([math.exp(x - top) for x in logw], label=f"tpois:{mean:g},{max_size}")


_FAMILY_RE = re.compile(r"^\s*truncated-poisson\(\s*([^,]+),\s*([^)]+)\)\s*$")


def parse_pmf(spec: str) -> BundlePmf:
    """Parse the pmf mini-language.

    Accepted forms: ``det:m``, ``uniform:a..b``, ``tpois:mean,max``,
    ``list:w1,w2,...`` and ``truncated-poisson(mean, max)``.
    """
    s = spec.strip()
    try:
        fam = _FAMILY_RE.match(s)
        if fam:
            return truncated_poisson(float(fam.group(1)), int(fam.group(2)))
        kind, _, arg = s.partition(":")
        kind = kind.strip().lower()
        if kind == "det":
            return deterministic(int(arg))
        if kind == "uniform":
            a, _, b = arg.partition("..")
            return uniform(int(a), int(b))
        if kind == "tpois":
            mean, _, mx = arg.partition(",")
            return truncated_poisson(float(mean), int(mx))
        if kind == "list":
            return make_pmf([float(x) for x in arg.split(",")], label=s)
    except (ValueError, InvalidDistributionError) as exc:
        raise ConfigError(f"bad pmf spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown pmf spec {spec!r}; use det:m, uniform:a..b, tpois:mean,max or list:w1,...")


def pmf_from_config(value) -> BundlePmf:
    """Build a pmf from a config value: a spec string or an explicit weight list."""
    if isinstance(value, str):
        return parse_pmf(value)
    if isinstance(value, (list, tuple)):
        try:
            return make_pmf(value)
        except InvalidDistributionError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"pmf must be a string or a list of weights, got {type(value).__name__}")
