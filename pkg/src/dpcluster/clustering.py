"""Threshold-sweep private k-medians / powered k-clustering.

Pipeline: geometric radii from diameter/n up to the diameter; at each radius
the private coverage routine picks candidate centers whose balls cover the
still-uncovered demand; demand is then snapped to the picked centers, the
per-center counts get Laplace noise, and a non-private black box clusters the
noisy weighted instance.
"""
from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence

import numpy as np

from .coverage import CoverageInstance, per_pick_epsilon, private_max_coverage
from .mechanisms import PrivacyBudget, RandomSource, noisy_count
from .metric import ClusteringSolution, InputError, MetricInstance, clustering_cost, diameter, nearest
from .solvers import BlackBoxSolver, WeightedInstance

MAX_UTILITY_EPSILON = 0.6


@dataclasses.dataclass(frozen=True)
class ThresholdSchedule:
    epsilon: float
    radii: tuple[float, ...]

    @property
    def r(self) -> int:
        return len(self.radii)


def build_thresholds(delta_diam: float, n: int, epsilon: float) -> ThresholdSchedule:
    """Radii t_i = (1+eps)^(i-1) * delta_diam / n for i = 1..r, r = ceil(1 + log_{1+eps} n).

    ``r`` is bumped if floating-point rounding leaves t_r below the diameter.
    A zero diameter gives the single radius 0.
    """
    if int(n) != n or n < 1:
        raise InputError(f"n must be a positive integer, got {n}")
    if not epsilon > 0:
        raise InputError(f"epsilon must be > 0, got {epsilon}")
    if not delta_diam >= 0:
        raise InputError("diameter must be nonnegative")
    if delta_diam == 0:
        return ThresholdSchedule(epsilon, (0.0,))
    r = math.ceil(1 + math.log(n) / math.log1p(epsilon))
    t1 = delta_diam / n
    radii = [t1 * (1 + epsilon) ** i for i in range(r)]
    while radii[-1] < delta_diam:
        radii.append(t1 * (1 + epsilon) ** len(radii))
    return ThresholdSchedule(epsilon, tuple(radii))


def picks_per_round(k: int, epsilon: float) -> int:
    """m = ceil(2k ln(1/eps))."""
    return math.ceil(2 * k * math.log(1 / epsilon))


@dataclasses.dataclass(frozen=True)
class RoundRecord:
    radius: float
    eps_prime: float
    chosen: tuple[int, ...]
    # evaluation only: demand slots still uncovered before the round, and
    # how many the round covered
    residual_before: tuple[int, ...] = ()
    newly_covered: int = 0


@dataclasses.dataclass(frozen=True)
class NoisyWeightedInstance:
    centers: tuple[int, ...]
    weights: tuple[float, ...]
    clamped_weights: tuple[float, ...]
    k: int
    power: float


@dataclasses.dataclass(frozen=True)
class DiagnosticProfile:
    o: tuple[int, ...]
    a: tuple[int, ...]
    snap_cost: float
    discretized_cost: float

    @staticmethod
    def suffix(counts: Sequence[int]) -> np.ndarray:
        return np.cumsum(np.asarray(counts)[::-1])[::-1]


@dataclasses.dataclass
class RunLog:
    schedule: ThresholdSchedule
    diameter: float
    picks_per_round: int
    rounds: list[RoundRecord]
    noisy: NoisyWeightedInstance
    counts: tuple[int, ...]
    budget_ledger: list[dict]
    solver: dict
    noisy_cost: float
    true_cost: float

    # which fields may be published; everything else is evaluation-only
    RELEASABLE = ("schedule", "diameter", "picks_per_round", "rounds.radius", "rounds.eps_prime",
                  "rounds.chosen", "noisy", "solver", "noisy_cost")

    def releasable(self) -> dict:
        return {
            "schedule": {"epsilon": self.schedule.epsilon, "radii": list(self.schedule.radii)},
            "diameter": self.diameter,
            "picks_per_round": self.picks_per_round,
            "rounds": [{"radius": r.radius, "eps_prime": r.eps_prime, "chosen": list(r.chosen)}
                       for r in self.rounds],
            "noisy_instance": {
                "centers": list(self.noisy.centers),
                "weights": list(self.noisy.weights),
                "clamped_weights": list(self.noisy.clamped_weights),
                "k": self.noisy.k,
                "power": self.noisy.power,
            },
            "solver": self.solver,
            "noisy_cost": self.noisy_cost,
        }

    def evaluation(self) -> dict:
        return {
            "true_cost": self.true_cost,
            "counts": list(self.counts),
            "rounds": [{"residual_before": len(r.residual_before), "newly_covered": r.newly_covered}
                       for r in self.rounds],
        }


def round_family(inst: MetricInstance, radius: float, dist_vd: np.ndarray) -> CoverageInstance:
    """Family {B_radius(v) : v candidate} over demand slots (rows follow ``inst.candidates``)."""
    return CoverageInstance.from_incidence(dist_vd <= radius)


def coverage_rounds(inst: MetricInstance, schedule: ThresholdSchedule, budget: PrivacyBudget,
                    m: int, rng: RandomSource, rounds: int | None = None) -> tuple[list[int], list[RoundRecord]]:
    """Runs the private coverage loop; returns the union of picked centers and per-round records."""
    budget.require_approximate()
    cands = inst.candidates
    dist_vd = inst.pairwise(cands, inst.demand)
    residual = np.ones(inst.demand.size, dtype=bool)
    eps_s, delta_s = budget.epsilon_p / 2, budget.delta_p
    m = min(m, cands.size)
    picked: set[int] = set()
    records = []
    for radius in schedule.radii[:rounds]:
        family = round_family(inst, radius, dist_vd)
        before = tuple(np.flatnonzero(residual).tolist())
        sel = private_max_coverage(family, residual, eps_s, delta_s, m, rng)
        chosen = tuple(int(cands[s]) for s in sel.chosen)
        covered = np.zeros_like(residual)
        covered[list(sel.covered)] = True
        residual &= ~covered
        picked.update(chosen)
        records.append(RoundRecord(radius, sel.eps_prime, chosen, before, len(sel.covered)))
    return sorted(picked), records


def snap_and_count(inst: MetricInstance, centers: Sequence[int]) -> dict[int, int]:
    """Demand count at each center after moving every demand point to its nearest center."""
    if len(centers) == 0:
        raise InputError("centers must be nonempty")
    assigned, _ = nearest(inst, inst.demand, centers)
    counts = {int(c): 0 for c in sorted(set(int(c) for c in centers))}
    for c in assigned.tolist():
        counts[c] += 1
    return counts


def noisy_weights(counts: Sequence[float], epsilon_p: float, rng: RandomSource,
                  budget_share: float = 0.5, samples: int | None = None) -> np.ndarray:
    """Adds Lap(1 / (budget_share * epsilon_p)) to each sensitivity-1 count.

    The default share of one half gives the Lap(2/epsilon_p) noise of the
    counting step.  With ``samples`` the result has shape (samples, len(counts)).
    """
    counts = np.asarray(counts, dtype=np.float64)
    shape = counts.shape if samples is None else (samples,) + counts.shape
    return noisy_count(counts, 1.0, budget_share * epsilon_p, rng, size=shape)


def threshold_profile(inst: MetricInstance, reference_centers: Sequence[int], schedule: ThresholdSchedule,
                      snapped_centers: Sequence[int] | None = None) -> DiagnosticProfile:
    """Band counts of demand distances along the schedule.

    o_i counts demand whose distance to ``reference_centers`` lies in
    [t_{i-1}, t_i) with t_0 = 0 (the last band is closed, since distances never
    exceed t_r).  ``a`` does the same for ``snapped_centers`` (default: the
    reference centers).  ``discretized_cost`` is sum o_i * t_i ** p.
    """
    radii = np.asarray(schedule.radii)
    p = inst.power

    def bands(centers):
        _, d = nearest(inst, inst.demand, centers)
        idx = np.searchsorted(radii, d, side="right")
        idx = np.minimum(idx, radii.size - 1)
        return np.bincount(idx, minlength=radii.size), d

    o, _ = bands(reference_centers)
    a, d_snap = bands(reference_centers if snapped_centers is None else snapped_centers)
    return DiagnosticProfile(
        o=tuple(int(x) for x in o),
        a=tuple(int(x) for x in a),
        snap_cost=float(np.sum(d_snap ** p)),
        discretized_cost=float(o @ radii ** p),
    )


def dp_cluster(inst: MetricInstance, epsilon: float, budget: PrivacyBudget, solver: BlackBoxSolver,
               rng: RandomSource) -> tuple[ClusteringSolution, NoisyWeightedInstance, RunLog]:
    """Private k-clustering of ``inst.demand`` under ``budget``.

    Half the privacy budget goes to the coverage loop and half to the noisy
    counts.  The returned solution's cost is measured on the true demand and
    is for evaluation only.
    """
    if not 0 < epsilon < MAX_UTILITY_EPSILON:
        raise InputError(f"epsilon must lie in (0, {MAX_UTILITY_EPSILON}), got {epsilon}")
    budget.require_approximate()
    if budget.delta_p >= 1:
        raise InputError("delta_p must lie in (0, 1)")
    powers = solver.descriptor.powers
    if powers != "any" and inst.power not in powers:
        raise InputError(f"solver {solver.descriptor.name} does not handle power {inst.power}")
    if inst.demand.size == 0:
        raise InputError("demand is empty")

    eps_p = budget.epsilon_p
    delta_diam = diameter(inst)
    schedule = build_thresholds(delta_diam, inst.n, epsilon)
    m = picks_per_round(inst.k, epsilon)
    ledger = [{"step": "laplace_counts", "epsilon": eps_p / 2, "delta": 0.0}]

    if delta_diam == 0:
        centers, records = [int(inst.candidates[0])], []
    else:
        centers, records = coverage_rounds(inst, schedule, budget, m, rng.substream(0))
        ledger.insert(0, {"step": "coverage_loop", "epsilon": eps_p / 2, "delta": budget.delta_p,
                          "eps_prime": per_pick_epsilon(eps_p / 2, budget.delta_p)})

    counts = snap_and_count(inst, centers)
    raw = noisy_weights(list(counts.values()), eps_p, rng.substream(1))
    clamped = np.maximum(raw, 0.0)
    noisy = NoisyWeightedInstance(tuple(counts), tuple(raw.tolist()), tuple(clamped.tolist()),
                                  inst.k, inst.power)

    if delta_diam == 0:
        solution = WeightedInstance(inst, inst.candidates, list(counts), clamped, inst.k, inst.power) \
            .solution(inst.candidates[:inst.k])
    else:
        weighted = WeightedInstance(inst, inst.candidates, list(counts), clamped, inst.k, inst.power)
        solution = solver.solve(weighted, rng.substream(2))
    true_cost, assignment = clustering_cost(inst, solution.centers)
    log = RunLog(
        schedule=schedule,
        diameter=delta_diam,
        picks_per_round=m,
        rounds=records,
        noisy=noisy,
        counts=tuple(counts.values()),
        budget_ledger=ledger,
        solver=dataclasses.asdict(solver.descriptor),
        noisy_cost=solution.cost,
        true_cost=true_cost,
    )
    result = ClusteringSolution(solution.centers, true_cost, tuple(assignment[i] for i in range(len(assignment))))
    return result, noisy, log


def euclidean_candidate_provider(points, mode: str = "identity", h: float | None = None, demand=None,
                                 k: int = 1, power: float = 2.0) -> MetricInstance:
    """Euclidean instance whose candidate centers come from ``mode``.

    ``identity`` uses the input points themselves.  ``grid`` rounds every
    point to the nearest corner of an axis-aligned grid of cell width ``h``
    and appends the distinct corners as the candidate set; demand stays on
    the original points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if demand is None:
        demand = np.arange(pts.shape[0])
    if mode == "identity":
        return MetricInstance(coords=pts, demand=demand, k=k, power=power)
    if mode == "grid":
        if h is None or not h > 0:
            raise InputError(f"grid width must be > 0, got {h}")
        corners = np.unique(np.round(pts / h) * h, axis=0)
        coords = np.vstack([pts, corners])
        cands = np.arange(pts.shape[0], coords.shape[0])
        return MetricInstance(coords=coords, demand=demand, k=k, power=power, candidates=cands)
    raise InputError(f"unknown candidate mode {mode!r}")
