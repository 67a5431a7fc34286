"""Monte Carlo simulation of bundle requests on a circle of packages.

Requests arrive as one Poisson stream of rate ``n * lam``; each carries a
uniform start location and an independent bundle size.  A request for
``k`` packages starting at ``i`` is accepted iff ``k <= n`` and every
position ``i, i+1, ..., i+k-1 (mod n)`` is still available.

Locations are 0-based throughout.
"""

from __future__ import annotations

from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bundle import BundlePmf
from .errors import DomainError

# replications per independently seeded chunk; fixed so results do not
# depend on how many workers are used
CHUNK_REPS = 8192
# bound on chunk_reps * n for the occupancy matrix
_MAX_CELLS = 4_000_000


@dataclass
class PickupTrace:
    n: int
    horizon: float
    accepted: list[tuple[float, int, int]]  # (time, start location, size)
    leftover: frozenset[int]

    def __post_init__(self):
        self._times = [a[0] for a in self.accepted]
        self._cum = np.cumsum([0] + [a[2] for a in self.accepted])

    def picked_count_at(self, t: float) -> int:
        """Packages picked up during ``[0, t]``."""
        return int(self._cum[bisect_right(self._times, t)])

    def bundles(self):
        """Index sets of the accepted bundles."""
        return [frozenset((i + j) % self.n for j in range(k)) for _, i, k in self.accepted]

    def picked_locations(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.leftover)] = False
        return np.flatnonzero(mask)


def simulate_circle(n: int, lam: float, F: BundlePmf, T: float, seed: int) -> PickupTrace:
    """One realization of the pickup process on ``[0, T]``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if lam < 0 or T < 0:
        raise DomainError("lambda and T must be nonnegative")
    rng = np.random.default_rng(seed)
    count = rng.poisson(n * lam * T) if lam * T > 0 else 0
    times = np.sort(rng.uniform(0.0, T, size=count))
    locs = rng.integers(0, n, size=count)
    sizes = F.sample(rng, count) if count else np.zeros(0, dtype=int)

    free = np.ones(n, dtype=bool)
    accepted = []
    for t, i, k in zip(times.tolist(), locs.tolist(), sizes.tolist()):
        if k > n:
            continue
        if i + k <= n:
            block = free[i:i + k]
            ok = block.all()
            if ok:
                free[i:i + k] = False
        else:
            idx = np.arange(i, i + k) % n
            ok = free[idx].all()
            if ok:
                free[idx] = False
        if ok:
            accepted.append((t, i, k))
    return PickupTrace(n=n, horizon=T, accepted=accepted,
                       leftover=frozenset(np.flatnonzero(free).tolist()))


def _simulate_chunk(n, lam, F, T, reps, rng, per_location=False):
    """Vectorized replications; returns picked counts (and per-location hits).

    Only the order of requests matters for the state at ``T``, so request
    times are not drawn: each replication processes its Poisson number of
    requests in sequence.
    """
    counts = rng.poisson(n * lam * T, size=reps) if lam * T > 0 else np.zeros(reps, dtype=int)
    occupied = np.zeros((reps, n), dtype=bool)
    m = F.m
    offsets = np.arange(m)
    probs = np.asarray(F.probs)
    kmax = int(counts.max()) if reps else 0
    for step in range(kmax):
        live = np.flatnonzero(counts > step)
        size = live.size
        start = rng.integers(0, n, size=size)
        bundle = rng.choice(m, size=size, p=probs) + 1
        pos = (start[:, None] + offsets[None, :]) % n
        inside = offsets[None, :] < bundle[:, None]
        taken = occupied[live[:, None], pos] & inside
        ok = ~taken.any(axis=1) & (bundle <= n)
        if not ok.any():
            continue
        rows = np.repeat(live[ok], m)
        cols = pos[ok].ravel()
        keep = inside[ok].ravel()
        occupied[rows[keep], cols[keep]] = True
    picked = occupied.sum(axis=1)
    if per_location:
        return picked, occupied.sum(axis=0)
    return picked, None


def _chunks(reps, n):
    size = max(1, min(CHUNK_REPS, _MAX_CELLS // max(n, 1)))
    out, start = [], 0
    while start < reps:
        out.append(min(size, reps - start))
        start += size
    return out


def _run(n, lam, F, T, reps, seed, per_location, workers):
    if n < 1:
        raise DomainError("n must be >= 1")
    if reps < 2:
        raise DomainError("need at least 2 replications")
    if lam < 0 or T < 0:
        raise DomainError("lambda and T must be nonnegative")
    sizes = _chunks(reps, n)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def one(c):
        return _simulate_chunk(n, lam, F, T, sizes[c], np.random.default_rng(seeds[c]), per_location)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(sizes))))
    else:
        results = [one(c) for c in range(len(sizes))]
    # combined strictly in chunk order
    picked = np.concatenate([r[0] for r in results])
    hits = sum(r[1] for r in results) if per_location else None
    return picked, hits


def mc_expected_pickups(n: int, lam: float, F: BundlePmf, T: float, reps: int, seed: int,
                        workers: int = 1) -> tuple[float, float]:
    """Monte Carlo estimate of C(T, n, lam): ``(mean, standard error)``.

    Replications are grouped into chunks seeded by ``SeedSequence(seed)``
    children, so the result is a pure function of ``(seed, reps)``.
    """
    picked, _ = _run(n, lam, F, T, reps, seed, False, workers)
    mean = float(picked.mean())
    se = float(picked.std(ddof=1) / np.sqrt(reps))
    return mean, se


def location_pickup_frequencies(n: int, lam: float, F: BundlePmf, T: float, reps: int,
                                seed: int) -> np.ndarray:
    """Fraction of replications in which each location was picked up by ``T``."""
    _, hits = _run(n, lam, F, T, reps, seed, True, 1)
    return hits / reps


def leftover_destinations(trace: PickupTrace, inst) -> np.ndarray:
    """Destinations of the packages still waiting at the end of ``trace``.

    Location ``i`` is the ``i``-th stop of the instance's TSP tour; points
    are returned in tour order.
    """
    if inst.order is None:
        raise DomainError("instance has no tour order; solve a TSP tour first")
    if trace.n != len(inst.order):
        raise DomainError(f"trace has {trace.n} locations but instance has {len(inst.order)} points")
    locs = sorted(trace.leftover)
    return inst.points[np.asarray(inst.order)[locs]] if locs else np.zeros((0, 2))
