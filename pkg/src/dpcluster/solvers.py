"""Non-private weighted clustering black boxes.

All solvers choose centers from a discrete facility set and minimise
``sum_j w_j * min_f d(x_j, f) ** p`` over weighted demand points.
"""
from __future__ import annotations

import dataclasses
import itertools
import math
from collections.abc import Sequence
from typing import Protocol

import numpy as np

from .mechanisms import RandomSource
from .metric import ClusteringSolution, InputError, MetricInstance

BRUTE_FORCE_GUARD = 1_000_000
_REL_IMPROVEMENT = 1e-9


class GuardExceeded(RuntimeError):
    """The exhaustive search would enumerate more subsets than allowed."""


@dataclasses.dataclass(frozen=True, eq=False)
class WeightedInstance:
    metric: MetricInstance
    facilities: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    k: int
    power: float

    def __post_init__(self):
        facilities = np.unique(np.asarray(self.facilities, dtype=np.int64))
        points = np.asarray(self.points, dtype=np.int64).reshape(-1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if points.shape != weights.shape:
            raise InputError("points and weights must have equal length")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InputError("weights must be finite and nonnegative")
        if not 1 <= self.k <= facilities.size:
            raise InputError(f"k={self.k} infeasible for {facilities.size} facilities")
        object.__setattr__(self, "facilities", facilities)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_pairs(cls, metric: MetricInstance, demand: Sequence[tuple[int, float]],
                   facilities=None, k=None, power=None) -> WeightedInstance:
        pts = [p for p, _ in demand]
        ws = [w for _, w in demand]
        return cls(metric, metric.candidates if facilities is None else facilities,
                   pts, ws, metric.k if k is None else k,
                   metric.power if power is None else power)

    def cost_matrix(self) -> np.ndarray:
        """Powered distance from each demand point (rows) to each facility (cols)."""
        return self.metric.pairwise(self.points, self.facilities) ** self.power

    def cost(self, centers: Sequence[int]) -> float:
        return float(self.weights @ self.metric.pairwise(self.points, centers).min(axis=1) ** self.power) \
            if self.points.size else 0.0

    def solution(self, centers) -> ClusteringSolution:
        centers = tuple(sorted(int(c) for c in centers))
        if self.points.size == 0:
            return ClusteringSolution(centers, 0.0, ())
        d = self.metric.pairwise(self.points, centers)
        j = np.argmin(d, axis=1)
        cost = float(self.weights @ d[np.arange(d.shape[0]), j] ** self.power)
        return ClusteringSolution(centers, cost, tuple(centers[i] for i in j))


@dataclasses.dataclass(frozen=True)
class SolverDescriptor:
    name: str
    approx_factor: float | str
    powers: tuple[float, ...] | str


class BlackBoxSolver(Protocol):
    descriptor: SolverDescriptor

    def solve(self, inst: WeightedInstance, rng: RandomSource | None = None) -> ClusteringSolution:
        ...


def _weighted_costs(cost: np.ndarray, weights: np.ndarray, combos: np.ndarray) -> np.ndarray:
    # cost: (m, F); combos: (c, k) facility positions
    return np.einsum("m,mc->c", weights, cost[:, combos].min(axis=2))


def brute_force_solver(inst: WeightedInstance, guard: int = BRUTE_FORCE_GUARD,
                       chunk: int = 20_000) -> ClusteringSolution:
    """Exact optimum by enumerating every k-subset of facilities.

    Subsets are visited in lexicographic order and only strictly better costs
    replace the incumbent, so the lexicographically smallest optimum wins.
    """
    nf = inst.facilities.size
    total = math.comb(nf, inst.k)
    if total > guard:
        raise GuardExceeded(f"C({nf},{inst.k}) = {total} subsets exceeds guard {guard}")
    if inst.points.size == 0:
        return inst.solution(inst.facilities[:inst.k])
    cost = inst.cost_matrix()
    best_val, best = math.inf, None
    it = itertools.combinations(range(nf), inst.k)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        vals = _weighted_costs(cost, inst.weights, block)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best = vals[i], block[i]
    return inst.solution(inst.facilities[best])


def brute_force_feasible(n_facilities: int, k: int, guard: int = BRUTE_FORCE_GUARD) -> bool:
    return math.comb(n_facilities, k) <= guard


def local_search_solver(inst: WeightedInstance, max_iters: int = 1000,
                        init: Sequence[int] | None = None) -> ClusteringSolution:
    """Single-swap local search for weighted k-medians.

    Each iteration applies the best improving swap of one open facility for
    one closed facility; a swap counts only if it lowers the cost by more than
    a 1e-9 relative margin.
    """
    if inst.power != 1:
        raise InputError("local search is provided for k-medians (power 1) only")
    if max_iters < 1:
        raise InputError("max_iters must be >= 1")
    nf, k = inst.facilities.size, inst.k
    pos = {int(f): i for i, f in enumerate(inst.facilities)}
    if init is None:
        current = list(range(k))
    else:
        current = sorted({pos[int(c)] for c in init})
        if len(current) != k:
            raise InputError("init must contain k distinct facilities")
    if inst.points.size == 0 or k == nf:
        return inst.solution(inst.facilities[current])
    cost = inst.cost_matrix()
    w = inst.weights
    for _ in range(max_iters):
        open_cost = cost[:, current]
        cur_val = float(w @ open_cost.min(axis=1))
        closed = np.setdiff1d(np.arange(nf), current)
        best_val, best_swap = cur_val, None
        for slot in range(k):
            rest = np.delete(open_cost, slot, axis=1).min(axis=1) if k > 1 else np.full(len(w), np.inf)
            vals = w @ np.minimum(rest[:, None], cost[:, closed])
            j = int(np.argmin(vals))
            if vals[j] < best_val:
                best_val, best_swap = float(vals[j]), (slot, int(closed[j]))
        if best_swap is None or cur_val - best_val <= _REL_IMPROVEMENT * cur_val:
            break
        slot, new = best_swap
        current[slot] = new
        current.sort()
    return inst.solution(inst.facilities[current])


def lloyd_weighted_solver(inst: WeightedInstance, rng: RandomSource, restarts: int = 5,
                          max_iters: int = 100, trace: list | None = None,
                          init: Sequence[int] | None = None) -> ClusteringSolution:
    """Weighted Lloyd iterations with centers snapped to the facility set.

    For squared distances the facility nearest to a cluster's weighted
    centroid is also the best facility for that cluster, so every snapped
    update is a true improvement step and the cost never increases.  Restart
    ``r`` draws its seeding from ``rng.substream(r)``; the best run wins.
    If ``trace`` is a list, each run's cost sequence is appended to it.
    ``init`` (k facility ids) replaces the seeding of the first run.
    """
    metric = inst.metric
    if not metric.euclidean:
        raise InputError("Lloyd's solver needs coordinates")
    if inst.power != 2:
        raise InputError("Lloyd's solver is provided for k-means (power 2) only")
    k = inst.k
    fac_xy = metric.coords[inst.facilities]
    if inst.points.size == 0 or inst.weights.sum() == 0 or k == inst.facilities.size:
        return inst.solution(inst.facilities[:k])
    pts_xy = metric.coords[inst.points]
    w = inst.weights
    cost = inst.cost_matrix()

    def snap(xy):
        return int(np.argmin(((fac_xy - xy) ** 2).sum(axis=1)))

    best = None
    for r in range(restarts):
        sub = rng.substream(r)
        if init is not None and r == 0:
            pos = {int(f): i for i, f in enumerate(inst.facilities)}
            centers = sorted({pos[int(c)] for c in init})
            if len(centers) != k:
                raise InputError("init must contain k distinct facilities")
        else:
            centers = _plus_plus_seed(cost, w, k, sub)
        run = []
        for _ in range(max_iters):
            d = cost[:, centers]
            label = np.argmin(d, axis=1)
            run.append(float(w @ d[np.arange(len(w)), label]))
            new = list(centers)
            for c in range(k):
                members = (label == c) & (w > 0)
                if members.any():
                    mu = (w[members, None] * pts_xy[members]).sum(axis=0) / w[members].sum()
                    new[c] = snap(mu)
                else:
                    # re-seed from the demand point contributing the most cost
                    contrib = w * d[np.arange(len(w)), label]
                    new[c] = snap(pts_xy[int(np.argmax(contrib))])
            if len(set(new)) < k:
                new = _dedupe(new, cost, w)
            new_val = float(w @ cost[:, new].min(axis=1))
            if new_val >= run[-1] or sorted(new) == sorted(centers):
                break
            centers = new
        final = float(w @ cost[:, centers].min(axis=1))
        if run[-1] != final:
            run.append(final)
        if trace is not None:
            trace.append(run)
        if best is None or final < best[0]:
            best = (final, sorted(centers))
    return inst.solution(inst.facilities[best[1]])


def _plus_plus_seed(cost: np.ndarray, w: np.ndarray, k: int, rng: RandomSource) -> list[int]:
    """k-means++ over demand points, each pick snapped to its nearest facility."""
    d = np.ones(len(w))
    centers: list[int] = []
    while len(centers) < k:
        mass = w * d
        if mass.sum() <= 0:
            centers = _dedupe(centers + [centers[0]] if centers else [0], cost, w)
            continue
        j = int(np.searchsorted(np.cumsum(mass) / mass.sum(), rng.uniform(), side="right"))
        f = int(np.argmin(cost[min(j, len(w) - 1)]))
        centers = _dedupe(centers + [f], cost, w)
        d = cost[:, centers].min(axis=1)
    return centers


def _dedupe(centers: list[int], cost: np.ndarray, w: np.ndarray) -> list[int]:
    out = []
    for c in centers:
        if c not in out:
            out.append(c)
    while len(out) < len(centers):
        d = cost[:, out].min(axis=1)
        gain = (w[:, None] * np.maximum(0.0, d[:, None] - cost)).sum(axis=0)
        gain[out] = -1
        out.append(int(np.argmax(gain)))
    return out


@dataclasses.dataclass
class BruteForce:
    guard: int = BRUTE_FORCE_GUARD
    descriptor: SolverDescriptor = SolverDescriptor("brute_force", "exact", "any")

    def solve(self, inst, rng=None):
        return brute_force_solver(inst, guard=self.guard)


@dataclasses.dataclass
class LocalSearch:
    max_iters: int = 1000
    descriptor: SolverDescriptor = SolverDescriptor("local_search", 5.0, (1.0,))

    def solve(self, inst, rng=None):
        return local_search_solver(inst, max_iters=self.max_iters)


@dataclasses.dataclass
class Lloyd:
    restarts: int = 5
    max_iters: int = 100
    descriptor: SolverDescriptor = SolverDescriptor("lloyd", "heuristic (no guarantee)", (2.0,))

    def solve(self, inst, rng=None):
        if rng is None:
            rng = RandomSource(0)
        return lloyd_weighted_solver(inst, rng, restarts=self.restarts, max_iters=self.max_iters)


SOLVERS = {"brute_force": BruteForce, "local_search": LocalSearch, "lloyd": Lloyd}


def make_solver(name: str, **params) -> BlackBoxSolver:
    try:
        return SOLVERS[name](**params)
    except KeyError:
        raise InputError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
