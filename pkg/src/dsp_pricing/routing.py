"""TSP and CVRP heuristics, CVRP length bounds, and tour diagnostics.

Distances are L1 by default.  Tours are closed cycles over point indices;
CVRP routes start and end at the depot, which is not listed in the route.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError

METRICS = ("l1", "l2")
BETA_VRP_L1 = 0.82
_EPS = 1e-10


def pairwise(P: np.ndarray, Q: np.ndarray | None = None, metric: str = "l1") -> np.ndarray:
    Q = P if Q is None else Q
    dx = P[:, None, 0] - Q[None, :, 0]
    dy = P[:, None, 1] - Q[None, :, 1]
    if metric == "l1":
        return np.abs(dx) + np.abs(dy)
    if metric == "l2":
        return np.hypot(dx, dy)
    raise DomainError(f"unknown metric {metric!r}")


def to_depot(P: np.ndarray, depot, metric: str = "l1") -> np.ndarray:
    d = np.asarray(P, dtype=float) - np.asarray(depot, dtype=float)
    if metric == "l1":
        return np.abs(d).sum(axis=1)
    if metric == "l2":
        return np.hypot(d[:, 0], d[:, 1])
    raise DomainError(f"unknown metric {metric!r}")


@dataclass
class Instance:
    """Package destinations, the depot, and (once solved) the tour order."""

    points: np.ndarray
    depot: np.ndarray = field(default_factory=lambda: np.zeros(2))
    metric: str = "l1"
    order: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.depot = np.asarray(self.depot, dtype=float).reshape(2)
        if self.metric not in METRICS:
            raise DomainError(f"metric must be one of {METRICS}, got {self.metric!r}")

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def r(self) -> np.ndarray:
        """Long-haul distances from the depot, indexed by point."""
        return to_depot(self.points, self.depot, self.metric)

    @property
    def r_bar(self) -> float:
        return float(self.r.mean()) if self.n else 0.0

    def distance_matrix(self) -> np.ndarray:
        return pairwise(self.points, metric=self.metric)

    def tour_edges(self) -> np.ndarray:
        """Edge lengths along the tour; ``e[k]`` joins stop ``k`` to stop ``k+1``."""
        if self.order is None:
            raise DomainError("instance has no tour order")
        p = self.points[self.order]
        q = np.roll(p, -1, axis=0)
        return _rowwise(p, q, self.metric)

    def local_distances(self) -> np.ndarray:
        """``d_k`` = mean of the two tour edges at stop ``k`` (circular)."""
        e = self.tour_edges()
        return 0.5 * (np.roll(e, 1) + e)

    def with_order(self, order) -> "Instance":
        return Instance(self.points, self.depot, self.metric, np.asarray(order, dtype=int))


def _rowwise(p, q, metric):
    d = p - q
    if metric == "l1":
        return np.abs(d).sum(axis=1)
    return np.hypot(d[:, 0], d[:, 1])


def read_instance_csv(path, depot=(0.0, 0.0), metric: str = "l1") -> Instance:
    """Load destinations from a CSV with header ``x,y``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "y"} <= set(reader.fieldnames):
            raise ConfigError(f"{path}: expected a header with columns x,y")
        pts = []
        for lineno, row in enumerate(reader, start=2):
            try:
                pts.append((float(row["x"]), float(row["y"])))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad coordinate ({exc})") from exc
    if not pts:
        raise ConfigError(f"{path}: no points")
    return Instance(np.array(pts), np.asarray(depot, dtype=float), metric)


def write_points_csv(path, points, extra: dict | None = None):
    path = Path(path)
    cols = ["x", "y"] + list(extra or {})
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for k, (x, y) in enumerate(points):
            w.writerow([x, y] + [extra[c][k] for c in extra or {}])


# --------------------------------------------------------------------- TSP

@dataclass
class Tour:
    order: np.ndarray
    length: float


def cycle_length(D: np.ndarray, order) -> float:
    order = np.asarray(order)
    if len(order) < 2:
        return 0.0
    return float(D[order, np.roll(order, -1)].sum())


def nearest_neighbor(D: np.ndarray, start: int = 0) -> np.ndarray:
    """Greedy tour; ties go to the lowest index."""
    n = len(D)
    visited = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=int)
    cur = start
    for k in range(n):
        order[k] = cur
        visited[cur] = True
        if k == n - 1:
            break
        row = np.where(visited, np.inf, D[cur])
        cur = int(np.argmin(row))
    return order


def two_opt(D: np.ndarray, order, max_moves: int | None = None) -> np.ndarray:
    """2-opt on a closed tour until no improving move (or ``max_moves``).

    Sweeps the first edge in tour order; for each, applies the best
    improving partner edge immediately.
    """
    tour = np.array(order, dtype=int)
    n = len(tour)
    if n < 4:
        return tour
    cap = 50 * n if max_moves is None else max_moves
    moves = 0
    improved = True
    while improved and moves < cap:
        improved = False
        for i in range(n - 2):
            a, b = tour[i], tour[i + 1]
            c = tour[i + 2:]
            d = np.append(tour[i + 3:], tour[0])
            if i == 0:
                c, d = c[:-1], d[:-1]
            if c.size == 0:
                continue
            delta = D[a, c] + D[b, d] - D[a, b] - D[c, d]
            j = int(np.argmin(delta))
            if delta[j] < -_EPS:
                j += i + 2
                tour[i + 1:j + 1] = tour[i + 1:j + 1][::-1].copy()
                moves += 1
                improved = True
                if moves >= cap:
                    break
    return tour


def or_opt(D: np.ndarray, order, seg_lengths=(1, 2, 3)) -> tuple[np.ndarray, bool]:
    """Move segments of 1-3 consecutive stops to their best position.

    Returns the new tour and whether any move was applied.
    """
    tour = [int(x) for x in order]
    n = len(tour)
    changed = False
    for L in seg_lengths:
        if n < L + 3:
            break
        i = 0
        while i + L <= n:
            seg = tour[i:i + L]
            prev, nxt = tour[i - 1], tour[(i + L) % n]
            s0, s1 = seg[0], seg[-1]
            gain = D[prev, s0] + D[s1, nxt] - D[prev, nxt]
            rest = tour[:i] + tour[i + L:]
            ra = np.asarray(rest)
            rb = np.roll(ra, -1)
            base = D[ra, rb]
            fwd = D[ra, s0] + D[s1, rb] - base
            rev = D[ra, s1] + D[s0, rb] - base
            jf, jr = int(np.argmin(fwd)), int(np.argmin(rev))
            if min(fwd[jf], rev[jr]) < gain - _EPS:
                if fwd[jf] <= rev[jr]:
                    j, piece = jf, seg
                else:
                    j, piece = jr, seg[::-1]
                tour = rest[:j + 1] + piece + rest[j + 1:]
                changed = True
            else:
                i += 1
    return np.asarray(tour, dtype=int), changed


def improve_tour(D: np.ndarray, order, use_or_opt: bool = True, max_rounds: int = 20) -> np.ndarray:
    tour = two_opt(D, order)
    if not use_or_opt:
        return tour
    for _ in range(max_rounds):
        tour, changed = or_opt(D, tour)
        if not changed:
            break
        tour = two_opt(D, tour)
    return tour


def tsp_tour(inst: Instance, use_or_opt: bool = True) -> Tour:
    """Nearest-neighbor tour from point 0 improved by 2-opt (and Or-opt)."""
    if inst.n < 1:
        raise DomainError("need at least one point")
    if inst.n == 1:
        return Tour(np.zeros(1, dtype=int), 0.0)
    D = inst.distance_matrix()
    start = nearest_neighbor(D)
    tour = improve_tour(D, start, use_or_opt)
    length = cycle_length(D, tour)
    assert length <= cycle_length(D, start) + 1e-9
    return Tour(tour, length)


# -------------------------------------------------------------------- CVRP

@dataclass
class CvrpSolution:
    routes: list[np.ndarray]
    route_lengths: list[float]
    total_length: float
    capacity: int
    method: str = ""


def _route_length(route, D, r) -> float:
    if len(route) == 0:
        return 0.0
    route = np.asarray(route)
    return float(r[route[0]] + r[route[-1]] + D[route[:-1], route[1:]].sum())


def _polish_route(route, P, depot, metric, use_or_opt=True, from_scratch=False):
    """Re-optimize one route as a closed tour through the depot."""
    if len(route) <= 2:
        return np.asarray(route, dtype=int)
    pts = np.vstack([np.asarray(depot)[None, :], P[route]])
    Dm = pairwise(pts, metric=metric)
    start = nearest_neighbor(Dm) if from_scratch else np.arange(len(pts))
    tour = improve_tour(Dm, start, use_or_opt)
    k = int(np.flatnonzero(tour == 0)[0])
    tour = np.roll(tour, -k)[1:]
    return np.asarray(route)[tour - 1]


def clarke_wright(D: np.ndarray, r: np.ndarray, V: int) -> list[list[int]]:
    """Parallel savings merge with a capacity of ``V`` stops per route."""
    n = len(r)
    if n == 0:
        return []
    iu, ju = np.triu_indices(n, 1)
    s = r[iu] + r[ju] - D[iu, ju]
    keep = s > 0
    iu, ju, s = iu[keep], ju[keep], s[keep]
    order = np.argsort(-s, kind="stable")
    owner = list(range(n))
    routes = {i: [i] for i in range(n)}
    for k in order.tolist():
        i, j = int(iu[k]), int(ju[k])
        ri, rj = owner[i], owner[j]
        if ri == rj:
            continue
        A, B = routes[ri], routes[rj]
        if len(A) + len(B) > V:
            continue
        if A[-1] != i:
            if A[0] != i:
                continue
            A = A[::-1]
        if B[0] != j:
            if B[-1] != j:
                continue
            B = B[::-1]
        routes[ri] = A + B
        del routes[rj]
        for x in B:
            owner[x] = ri
    return list(routes.values())


def sweep_partition(P: np.ndarray, depot, V: int, offset: int = 0) -> list[np.ndarray]:
    """Split points by polar angle around the depot into balanced groups."""
    n = len(P)
    k = max(1, math.ceil(n / V))
    ang = np.arctan2(P[:, 1] - depot[1], P[:, 0] - depot[0])
    order = np.roll(np.argsort(ang, kind="stable"), -offset)
    return [g for g in np.array_split(order, k) if len(g)]


def cvrp_solve(points, depot, V: int, metric: str = "l1", use_or_opt: bool = True,
               sweep_starts: int = 4) -> CvrpSolution:
    """Capacitated routing by savings and by angular sweep; keeps the shorter.

    Each candidate's routes are re-optimized with 2-opt (and Or-opt) as
    depot-anchored tours.
    """
    if V < 1:
        raise DomainError("capacity V must be >= 1")
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    depot = np.asarray(depot, dtype=float)
    n = len(P)
    if n == 0:
        return CvrpSolution([], [], 0.0, V, "empty")
    D = pairwise(P, metric=metric)
    r = to_depot(P, depot, metric)

    candidates = []
    cw = [_polish_route(np.asarray(x), P, depot, metric, use_or_opt) for x in clarke_wright(D, r, V)]
    candidates.append(("savings", cw))
    if n > V:
        k = math.ceil(n / V)
        step = max(1, (n // k) // max(1, sweep_starts))
        for s in range(max(1, sweep_starts)):
            groups = sweep_partition(P, depot, V, offset=s * step)
            routes = [_polish_route(g, P, depot, metric, use_or_opt, from_scratch=True) for g in groups]
            candidates.append(("sweep", routes))

    best = None
    for name, routes in candidates:
        lengths = [_route_length(x, D, r) for x in routes]
        total = math.fsum(lengths)
        if best is None or total < best.total_length - 1e-12:
            best = CvrpSolution(routes, lengths, total, V, name)
    assert sorted(np.concatenate(best.routes).tolist()) == list(range(n))
    assert max(len(x) for x in best.routes) <= V
    return best


def cvrp_bounds(points, depot, V: int, tsp_len: float, metric: str = "l1") -> tuple[float, float]:
    """Lower and upper bounds on the optimal CVRP length.

    ``max(2 n rbar / V, L_tsp) <= L_cvrp <= 2 (n / V + 1) rbar + L_tsp``.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(P)
    if n == 0:
        return 0.0, 0.0
    rbar = float(to_depot(P, depot, metric).mean())
    lower = max(2.0 * n * rbar / V, tsp_len)
    upper = 2.0 * (n / V + 1.0) * rbar + tsp_len
    return lower, upper


def cvrp_continuous(k: float, r_bar: float, A: float, V: int, beta: float = BETA_VRP_L1) -> float:
    """Continuous approximation ``2 k rbar / V + beta sqrt(k A)``."""
    if k < 0 or A <= 0 or V < 1:
        raise DomainError("need k >= 0, A > 0, V >= 1")
    if k == 0:
        return 0.0
    return 2.0 * k * r_bar / V + beta * math.sqrt(k * A)


# ------------------------------------------------------------ diagnostics

@dataclass
class NeighborDensity:
    edges: np.ndarray
    density: np.ndarray
    mean: float
    sd: float
    q75: float
    q95: float


def neighbor_density(tour: Tour, inst: Instance, bins: int = 50, range_=None) -> NeighborDensity:
    """Empirical density of consecutive stop distances along ``tour``."""
    if len(tour.order) < 2:
        raise DomainError("need a tour over at least two points")
    dists = inst.with_order(tour.order).tour_edges()
    if range_ is None:
        hi = float(dists.max())
        range_ = (0.0, hi if hi > 0 else 1.0)
    density, edges = np.histogram(dists, bins=bins, range=range_, density=True)
    return NeighborDensity(edges, density, float(dists.mean()), float(dists.std()),
                           float(np.quantile(dists, 0.75)), float(np.quantile(dists, 0.95)))
