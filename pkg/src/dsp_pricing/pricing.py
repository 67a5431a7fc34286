"""Per-package rewards, expected delivery cost, and the incentive-rate optimizer.

The only decision variable is the incentive rate ``z`` paid on top of the
drivers' hourly opportunity cost.  It sets the request rate ``lam(z)``,
hence the expected number of pickups ``C(T, n, lam(z))``, and the cost
trades private-driver payments against van delivery of the leftovers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .asymptotic import AlphaQuery, alpha
from .bundle import BundlePmf
from .errors import DomainError
from .exact import DEFAULT_CAP, get_table
from .routing import BETA_VRP_L1, Instance

PickupProvider = Callable[[float], float]


@dataclass(frozen=True)
class CostParams:
    """Economic constants; distances in miles, times in hours, money in dollars."""

    zeta_P: float
    h_P: float
    v_P: float
    tau_P: float
    zeta_V: float
    h_V: float
    v_V: float
    tau_V: float
    V: int
    A: float
    beta_vrp: float = BETA_VRP_L1
    T: float = 8.0

    def __post_init__(self):
        positive = ("zeta_P", "h_P", "v_P", "zeta_V", "h_V", "v_V", "V", "A", "beta_vrp", "T")
        for name in positive:
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("tau_P", "tau_V"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def van_mile_rate(self) -> float:
        """Van dollars per mile, fuel plus driver time."""
        return self.zeta_V + self.h_V / self.v_V

    def private_mile_rate(self, z: float) -> float:
        return self.zeta_P + (self.h_P + z) / self.v_P

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class IncentiveModel:
    """Request rate per location as an affine function of ``z``, floored at 0."""

    a: float
    b: float

    def __post_init__(self):
        if self.a < 0:
            raise DomainError("incentive slope must be >= 0 (rate nondecreasing in z)")

    def __call__(self, z: float) -> float:
        return max(0.0, self.b + self.a * z)


@dataclass(frozen=True)
class InstanceSummary:
    n: int
    r_bar: float
    tsp_len: float
    r_list: np.ndarray
    d_list: np.ndarray

    @property
    def r_sum(self) -> float:
        return math.fsum(self.r_list)


def summarize(inst: Instance) -> InstanceSummary:
    """Per-package distances in tour order; the instance must carry a tour."""
    if inst.order is None:
        raise DomainError("instance has no tour order")
    r = inst.r[inst.order]
    d = inst.local_distances()
    return InstanceSummary(inst.n, float(r.mean()), float(inst.tour_edges().sum()), r, d)


def _check_rate(params: CostParams, z):
    if np.any(np.asarray(params.h_P + z) < -1e-12):
        raise DomainError(f"payment rate h_P + z must be >= 0 (z >= {-params.h_P})")


def delivery_time(r_j, d_j, params: CostParams, mu: float):
    """Estimated hours to deliver one package."""
    return r_j / (mu * params.v_P) + d_j / params.v_P + params.tau_P


def package_price(r_j, d_j, params: CostParams, z: float, mu: float):
    """Reward for one package: prorated long haul plus local distance plus drop-off."""
    _check_rate(params, z)
    if mu < 1:
        raise DomainError("mean bundle size must be >= 1")
    return (params.zeta_P * (r_j / mu + d_j)
            + (params.h_P + z) * delivery_time(r_j, d_j, params, mu))


def bundle_prices(i: int, k: int, inst: Instance, params: CostParams, z: float) -> tuple[float, float]:
    """Price of bundle ``i..i+k-1`` (tour positions, circular) two ways.

    ``price1`` charges the bundle's actual route from the depot;
    ``price2`` adds up the per-package prorated prices with ``E[B] = k``.
    """
    _check_rate(params, z)
    n = inst.n
    if inst.order is None:
        raise DomainError("instance has no tour order")
    if not (0 <= i < n and 1 <= k <= n):
        raise DomainError(f"invalid bundle start={i}, size={k} for n={n}")
    pos = (i + np.arange(k)) % n
    r = inst.r[inst.order][pos]
    edges = inst.tour_edges()
    inner = math.fsum(edges[pos[:-1]])
    d = inst.local_distances()[pos]
    rate = params.h_P + z
    price1 = params.zeta_P * (r[0] + inner) + rate * (r[0] / params.v_P + inner / params.v_P + k * params.tau_P)
    price2 = (params.zeta_P * (r.sum() / k + d.sum())
              + rate * (r.sum() / (k * params.v_P) + d.sum() / params.v_P + k * params.tau_P))
    return float(price1), float(price2)


def price_sum(summary: InstanceSummary, params: CostParams, z: float, mu: float) -> float:
    """Closed form of the sum of all package prices."""
    return (params.private_mile_rate(z) * (summary.r_sum / mu + summary.tsp_len)
            + summary.n * (params.h_P + z) * params.tau_P)


def pickup_provider(F: BundlePmf, n: int, T: float, cap: int = DEFAULT_CAP,
                    quad_tol: float = 1e-10) -> PickupProvider:
    """``lam -> C(T, n, lam)``: exact for ``n <= cap``, else ``n * alpha``."""
    if n <= cap:
        tab = get_table(F, n, cap)

        def exact(lam: float) -> float:
            return 0.0 if lam <= 0 else tab.pickups_circle(T, n, lam)

        exact.method = "exact"
        return exact

    def asymptotic(lam: float) -> float:
        return 0.0 if lam <= 0 else n * alpha(AlphaQuery(T, lam, F, quad_tol))

    asymptotic.method = "alpha"
    return asymptotic


def expected_private_cost(z: float, summary: InstanceSummary, params: CostParams, F: BundlePmf,
                          model: IncentiveModel, C_provider: PickupProvider) -> float:
    """Expected payments to private drivers at incentive rate ``z``."""
    _check_rate(params, z)
    C = C_provider(model(z))
    if C == 0:
        return 0.0
    n = summary.n
    return (C / n * params.private_mile_rate(z) * (summary.r_sum / F.mean + summary.tsp_len)
            + C * (params.h_P + z) * params.tau_P)


def van_cost_for(k: float, r_bar: float, params: CostParams) -> float:
    """Van cost for ``k`` packages using the continuous route-length approximation."""
    k = max(0.0, k)
    if k == 0:
        return 0.0
    length = 2.0 * k * r_bar / params.V + params.beta_vrp * math.sqrt(k * params.A)
    return params.van_mile_rate * length + k * params.h_V * params.tau_V


def leftover_van_cost(z: float, summary: InstanceSummary, params: CostParams, model: IncentiveModel,
                      C_provider: PickupProvider) -> float:
    """Expected van cost for the packages nobody picked up."""
    return van_cost_for(summary.n - C_provider(model(z)), summary.r_bar, params)


def total_cost(z: float, summary: InstanceSummary, params: CostParams, F: BundlePmf,
               model: IncentiveModel, C_provider: PickupProvider | None = None) -> float:
    """Expected total cost of the mixed strategy at incentive rate ``z``."""
    if C_provider is None:
        C_provider = pickup_provider(F, summary.n, params.T)
    C = C_provider(model(z))

    def fixed(_lam):
        return C

    return (expected_private_cost(z, summary, params, F, model, fixed)
            + leftover_van_cost(z, summary, params, model, fixed))


def van_only_cost(cvrp_len: float, n: int, params: CostParams) -> float:
    return params.van_mile_rate * cvrp_len + n * params.h_V * params.tau_V


def z_bounds(params: CostParams) -> tuple[float, float]:
    """Range of incentive rates where private drivers can be cheaper than vans.

    With ``tau_P = 0`` the drop-off term is unbounded and is left out.
    """
    by_distance = (params.van_mile_rate - params.zeta_P) * params.v_P
    candidates = [by_distance]
    if params.tau_P > 0:
        candidates.append(params.h_V * params.tau_V / params.tau_P)
    return -params.h_P, max(candidates) - params.h_P


def golden_section(f, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 200):
    """Golden-section minimization on ``[lo, hi]``; returns ``(x, f(x))``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


@dataclass
class OptimizationResult:
    z_star: float
    cost_star: float
    z_grid: np.ndarray
    cost_grid: np.ndarray
    method: str


def optimize_incentive(summary: InstanceSummary, params: CostParams, F: BundlePmf, model: IncentiveModel,
                       C_provider: PickupProvider | None = None, grid_points: int = 64,
                       tol: float = 1e-6, bounds: tuple[float, float] | None = None) -> OptimizationResult:
    """Minimize the expected total cost over the admissible ``z`` range.

    A uniform grid locates the best bracket, golden-section search refines
    inside it, and the grid minimum is kept if refinement does not beat it.
    """
    if C_provider is None:
        C_provider = pickup_provider(F, summary.n, params.T)
    lo, hi = z_bounds(params) if bounds is None else bounds
    if hi < lo:
        raise DomainError(f"empty incentive range [{lo}, {hi}]")

    def cost(z):
        return total_cost(z, summary, params, F, model, C_provider)

    grid = np.linspace(lo, hi, grid_points)
    values = np.array([cost(z) for z in grid])
    k = int(np.argmin(values))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid_points - 1)]
    z, c = golden_section(cost, a, b, tol)
    if c > values[k]:
        z, c = float(grid[k]), float(values[k])
    return OptimizationResult(float(z), float(c), grid, values, getattr(C_provider, "method", "custom"))


def advantage_condition(params: CostParams, r_star: float, mu: float) -> float:
    """Sufficient-condition value; positive means some ``z`` beats van-only delivery."""
    return (params.van_mile_rate * 2.0 * r_star / params.V
            - (params.zeta_P + params.h_P / params.v_P) * r_star / mu
            - (params.h_P * params.tau_P - params.h_V * params.tau_V))


def asymptotic_advantage(params: CostParams, r_star: float, mu: float, z: float, alpha_T: float) -> float:
    """Upper bound on the per-package cost gap (mixed minus van-only) as n grows."""
    if not 0.0 <= alpha_T <= 1.0:
        raise DomainError("alpha must lie in [0, 1]")
    slope = r_star / (params.v_P * mu) + params.tau_P
    return -alpha_T * (advantage_condition(params, r_star, mu) - z * slope)
