"""Destination generators, calibrated defaults, and the end-to-end case study."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .bundle import BundlePmf, truncated_poisson
from .errors import ConfigError, DomainError
from .pricing import (CostParams, IncentiveModel, optimize_incentive, package_price, summarize,
                      van_only_cost)
from .routing import Instance, cvrp_solve, tsp_tour
from .simulate import leftover_destinations, simulate_circle

SIDE = 5.0
TAU_SECONDS = 97.0

# (count, center x, center y, semi-axis x, semi-axis y); None = whole square
CLUSTER_LAYOUT = (
    (500, None, None, None, None),
    (700, 1.5, 4.0, 1.2, 1.0),
    (500, 3.8, 3.3, 0.8, 1.2),
    (300, 2.5, 1.4, 1.2, 1.0),
)


def default_params() -> tuple[CostParams, IncentiveModel, BundlePmf]:
    """Calibrated constants for an average U.S. city.

    Van: $0.550/mile, $42.389/hour, 24.1 mph, 200 packages, 97 s per stop.
    Private car: $0.1284/mile, $16.49/hour, 29.9 mph, same stop time.
    5 x 5 mile region, 8 hour pickup window, ``lam(z) = 0.03 + 0.04 z``,
    bundle sizes Poisson(10) conditioned on 1..20.
    """
    tau = TAU_SECONDS / 3600.0
    params = CostParams(zeta_P=0.1284, h_P=16.49, v_P=29.9, tau_P=tau,
                        zeta_V=0.550, h_V=42.389, v_V=24.1, tau_V=tau,
                        V=200, A=SIDE * SIDE, beta_vrp=0.82, T=8.0)
    return params, IncentiveModel(a=0.04, b=0.03), truncated_poisson(10.0, 20)


def gen_uniform_square(n: int, side: float = SIDE, seed: int = 0) -> np.ndarray:
    if n < 1 or side <= 0:
        raise DomainError("need n >= 1 and side > 0")
    return np.random.default_rng(seed).uniform(0.0, side, size=(n, 2))


def _uniform_ellipse(rng, count, cx, cy, ax, ay) -> np.ndarray:
    out = np.empty((0, 2))
    while len(out) < count:
        need = count - len(out)
        cand = rng.uniform((cx - ax, cy - ay), (cx + ax, cy + ay), size=(2 * need + 8, 2))
        inside = ((cand[:, 0] - cx) / ax) ** 2 + ((cand[:, 1] - cy) / ay) ** 2 <= 1.0
        out = np.vstack([out, cand[inside][:need]])
    return out


def cluster_counts(n: int) -> list[int]:
    """Cluster sizes for ``n`` points, proportional to the 2000-point layout."""
    base = [c[0] for c in CLUSTER_LAYOUT]
    total = sum(base)
    counts = [int(round(b * n / total)) for b in base]
    counts[0] += n - sum(counts)
    return counts


def gen_three_clusters(seed: int = 0, n: int = 2000, side: float = SIDE) -> np.ndarray:
    """Background uniform points plus three elliptical clusters.

    The default 2000 points split 500 / 700 / 500 / 300; other sizes keep
    the proportions.
    """
    rng = np.random.default_rng(seed)
    parts = []
    for count, (_, cx, cy, ax, ay) in zip(cluster_counts(n), CLUSTER_LAYOUT):
        if cx is None:
            parts.append(rng.uniform(0.0, side, size=(count, 2)))
        else:
            parts.append(_uniform_ellipse(rng, count, cx, cy, ax, ay))
    return np.vstack(parts)


KINDS = ("uniform_square", "three_clusters", "custom_csv")


@dataclass
class Scenario:
    kind: str = "uniform_square"
    n: int = 2000
    side: float = SIDE
    seed: int = 0
    depot: str = "center"  # "center" or "corner"
    points: np.ndarray | None = None  # for custom_csv

    def __post_init__(self):
        aliases = {"uniform": "uniform_square", "clusters": "three_clusters", "csv": "custom_csv"}
        self.kind = aliases.get(self.kind, self.kind)
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if self.kind == "custom_csv" and self.points is None:
            raise ConfigError("custom_csv scenario needs points")
        if self.kind == "custom_csv":
            self.n = len(self.points)
        if self.n <= 0 or self.side <= 0:
            raise ConfigError("scenario needs n > 0 and side > 0")
        if self.depot not in ("center", "corner"):
            raise ConfigError("depot must be 'center' or 'corner'")

    def depot_xy(self) -> np.ndarray:
        return np.full(2, self.side / 2.0) if self.depot == "center" else np.zeros(2)

    def generate(self, replicate: int = 0) -> np.ndarray:
        seed = [self.seed, replicate]
        if self.kind == "uniform_square":
            return gen_uniform_square(self.n, self.side, seed)
        if self.kind == "three_clusters":
            return gen_three_clusters(seed, self.n, self.side)
        return np.asarray(self.points, dtype=float)


@dataclass
class SeedResult:
    seed: int
    z_star: float
    expected_cost: float
    cost_mixed: float
    cost_van_only: float
    improvement_pct: float
    leftover_count: int
    payments: float
    tsp: float
    cvrp_all: float
    cvrp_leftover: float
    r_bar: float


@dataclass
class CaseStudyReport:
    scenario: dict
    params: dict
    seeds: list[int]
    per_seed: list[SeedResult]
    z_star: tuple[float, float]
    cost_mixed: tuple[float, float]
    cost_van_only: tuple[float, float]
    improvement_pct: tuple[float, float]
    leftover_count: tuple[float, float]
    lengths: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_seed"] = [asdict(s) for s in self.per_seed]
        return out


def _mean_sd(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


def run_one_seed(scenario: Scenario, replicate: int, params: CostParams, model: IncentiveModel,
                 F: BundlePmf, lam_override: float | None = None) -> SeedResult:
    """Generate, price, simulate and route one realization."""
    points = scenario.generate(replicate)
    inst = Instance(points, scenario.depot_xy(), "l1")
    tour = tsp_tour(inst)
    inst = inst.with_order(tour.order)
    summary = summarize(inst)
    opt = optimize_incentive(summary, params, F, model)
    z = opt.z_star
    lam = model(z) if lam_override is None else lam_override

    sim_seed = int(np.random.SeedSequence([scenario.seed, replicate, 1]).generate_state(1)[0])
    trace = simulate_circle(inst.n, lam, F, params.T, sim_seed)
    prices = package_price(summary.r_list, summary.d_list, params, z, F.mean)
    payments = math.fsum(prices[trace.picked_locations()])
    left_pts = leftover_destinations(trace, inst)
    left = cvrp_solve(left_pts, inst.depot, params.V)
    mixed = payments + van_only_cost(left.total_length, len(left_pts), params)

    full = cvrp_solve(points, inst.depot, params.V)
    van = van_only_cost(full.total_length, inst.n, params)
    return SeedResult(seed=replicate, z_star=z, expected_cost=opt.cost_star, cost_mixed=mixed,
                      cost_van_only=van, improvement_pct=100.0 * (van - mixed) / van,
                      leftover_count=len(left_pts), payments=payments, tsp=tour.length,
                      cvrp_all=full.total_length, cvrp_leftover=left.total_length,
                      r_bar=summary.r_bar)


def run_case_study(scenario: Scenario, overrides: dict | None = None, n_seeds: int = 5,
                   workers: int = 1, lam_override: float | None = None) -> CaseStudyReport:
    """Full mixed-vs-van comparison over ``n_seeds`` independent realizations.

    ``overrides`` replaces fields of the default :class:`CostParams`; the
    keys ``a``/``b`` set the incentive model.
    """
    params, model, F = default_params()
    overrides = dict(overrides or {})
    if "a" in overrides or "b" in overrides:
        model = IncentiveModel(overrides.pop("a", model.a), overrides.pop("b", model.b))
    if "pmf" in overrides:
        F = overrides.pop("pmf")
    if overrides:
        try:
            params = replace(params, **overrides)
        except TypeError as exc:
            raise ConfigError(f"unknown parameter override: {exc}") from exc
    seeds = list(range(n_seeds))

    def one(s):
        return run_one_seed(scenario, s, params, model, F, lam_override)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]

    scen = {"kind": scenario.kind, "n": scenario.n, "side": scenario.side,
            "seed": scenario.seed, "depot": scenario.depot}
    lengths = {key: _mean_sd([getattr(r, key) for r in results])
               for key in ("tsp", "cvrp_all", "cvrp_leftover")}
    return CaseStudyReport(
        scenario=scen,
        params={**params.as_dict(), "a": model.a, "b": model.b, "pmf": F.label or list(F.probs)},
        seeds=seeds,
        per_seed=results,
        z_star=_mean_sd([r.z_star for r in results]),
        cost_mixed=_mean_sd([r.cost_mixed for r in results]),
        cost_van_only=_mean_sd([r.cost_van_only for r in results]),
        improvement_pct=_mean_sd([r.improvement_pct for r in results]),
        leftover_count=_mean_sd([r.leftover_count for r in results]),
        lengths=lengths,
    )
