"""Monte Carlo falsification of (epsilon, delta)-DP claims on neighboring inputs.

A PASS means no violation was detected at the stated confidence; it is not a
certificate.  For every tested event S and both directions the audit checks

    lower(Pr_A[S]) <= exp(eps) * upper(Pr_B[S]) + delta

with Clopper-Pearson bounds, Bonferroni-corrected over the tested events.
"""
from __future__ import annotations

import collections
import dataclasses
import math
from collections.abc import Callable, Hashable, Sequence

import numpy as np
from scipy import stats

from .clustering import build_thresholds, coverage_rounds, noisy_weights, picks_per_round, snap_and_count
from .coverage import CoverageInstance, private_max_coverage, sample_first_picks
from .mechanisms import PrivacyBudget, RandomSource, noisy_count
from .metric import InputError, MetricInstance, diameter

MIN_SAMPLES_PER_OUTCOME = 1000
PASS_STATEMENT = "no violation detected at this confidence"


class AuditRefused(InputError):
    """Outcome space too large for the requested number of samples."""


@dataclasses.dataclass(frozen=True, eq=False)
class NeighborPair:
    """Two datasets whose demand multisets differ in exactly one element."""

    base: object
    variant: object

    def __post_init__(self):
        a, b = _demand_of(self.base), _demand_of(self.variant)
        diff = (a - b) + (b - a)
        if sum(diff.values()) != 1:
            raise InputError(f"neighbors must differ in exactly one demand element, got {sum(diff.values())}")
        if isinstance(self.base, MetricInstance) and isinstance(self.variant, MetricInstance):
            pa, pb = self.base, self.variant
            same = (pa.coords is None) == (pb.coords is None) and np.array_equal(
                pa.coords if pa.coords is not None else pa.matrix,
                pb.coords if pb.coords is not None else pb.matrix)
            if not same:
                raise InputError("neighbors must share the point set")

    def swapped(self) -> NeighborPair:
        return NeighborPair(self.variant, self.base)


def _demand_of(dataset) -> collections.Counter:
    if isinstance(dataset, MetricInstance):
        return collections.Counter(dataset.demand.tolist())
    if isinstance(dataset, np.ndarray):
        return collections.Counter(dataset.reshape(-1).tolist())
    return collections.Counter(dataset)


@dataclasses.dataclass(frozen=True)
class EventCheck:
    outcomes: tuple
    direction: str
    p_num: float
    p_den: float
    ratio: float
    eps_lower_bound: float
    violated: bool


@dataclasses.dataclass
class AuditReport:
    outcomes: list
    samples: int
    claimed: PrivacyBudget
    confidence: float
    freq_a: list[float]
    freq_b: list[float]
    ci_a: list[tuple[float, float]]
    ci_b: list[tuple[float, float]]
    events: list[EventCheck]
    worst_ratio: float
    epsilon_lower_bound: float
    passed: bool

    @property
    def verdict(self) -> str:
        return f"PASS ({PASS_STATEMENT})" if self.passed else "FAIL"

    def directed_ratio(self, direction: str) -> float:
        vals = [e.ratio for e in self.events if e.direction == direction]
        return max(vals) if vals else 1.0

    def to_dict(self) -> dict:
        return {
            "outcome_space": [_jsonable(o) for o in self.outcomes],
            "samples": self.samples,
            "claimed": dataclasses.asdict(self.claimed),
            "confidence": self.confidence,
            "frequencies": {"A": self.freq_a, "B": self.freq_b},
            "intervals": {"A": [list(c) for c in self.ci_a], "B": [list(c) for c in self.ci_b]},
            "events": [
                {**dataclasses.asdict(e), "outcomes": [_jsonable(o) for o in e.outcomes]}
                for e in self.events
            ],
            "worst_ratio": self.worst_ratio,
            "epsilon_lower_bound": self.epsilon_lower_bound,
            "verdict": self.verdict,
        }


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, tuple):
        return [_jsonable(x) for x in o]
    return o


def clopper_pearson(count: int, n: int, alpha: float) -> tuple[float, float]:
    lo = 0.0 if count == 0 else float(stats.beta.ppf(alpha / 2, count, n - count + 1))
    hi = 1.0 if count == n else float(stats.beta.ppf(1 - alpha / 2, count + 1, n - count))
    return lo, hi


def _sample(mechanism, dataset, samples: int, rng: RandomSource, batched: bool) -> list:
    if batched:
        out = mechanism(dataset, rng, samples)
        return np.asarray(out).tolist()
    return [mechanism(dataset, rng) for _ in range(samples)]


def audit(mechanism: Callable, pair: NeighborPair, samples: int, claimed: PrivacyBudget,
          rng: RandomSource, outcomes: Sequence[Hashable] | None = None,
          confidence: float = 0.99, batched: bool = False) -> AuditReport:
    """Runs ``mechanism`` ``samples`` times on each side of ``pair`` and tests the claim.

    ``mechanism(dataset, rng)`` returns one hashable outcome, or with
    ``batched=True`` ``mechanism(dataset, rng, size)`` returns ``size`` of
    them.  Singleton events and, per direction, the greedy worst-case event
    (outcomes added in decreasing empirical ratio, keeping the prefix with
    the largest certified violation margin) are tested.
    """
    if outcomes is not None:
        outcomes = list(outcomes)
        if samples < MIN_SAMPLES_PER_OUTCOME * len(outcomes):
            raise AuditRefused(
                f"{len(outcomes)} outcomes need >= {MIN_SAMPLES_PER_OUTCOME * len(outcomes)} samples; "
                "project the mechanism onto a coarser outcome")
    xs = _sample(mechanism, pair.base, samples, rng.substream(0), batched)
    ys = _sample(mechanism, pair.variant, samples, rng.substream(1), batched)
    ca, cb = collections.Counter(xs), collections.Counter(ys)
    seen = set(ca) | set(cb)
    if outcomes is None:
        outcomes = sorted(seen, key=repr)
        if samples < MIN_SAMPLES_PER_OUTCOME * len(outcomes):
            raise AuditRefused(
                f"observed {len(outcomes)} outcomes; {samples} samples is too few. "
                "Project the mechanism onto a coarser outcome")
    elif not seen <= set(outcomes):
        raise InputError(f"mechanism produced undeclared outcomes {sorted(seen - set(outcomes), key=repr)[:5]}")

    na = np.array([ca[o] for o in outcomes])
    nb = np.array([cb[o] for o in outcomes])
    alpha = 1 - confidence
    ci_a = [clopper_pearson(int(c), samples, alpha) for c in na]
    ci_b = [clopper_pearson(int(c), samples, alpha) for c in nb]

    # events: singletons + one greedy prefix event, both directions
    n_events = 2 * (len(outcomes) + 1)
    decision_alpha = alpha / n_events
    eps, delta = claimed.epsilon_p, claimed.delta_p
    events = []
    for direction, num, den in (("A>B", na, nb), ("B>A", nb, na)):
        cands = [[i] for i in range(len(outcomes))]
        cands.append(_greedy_event(num, den, samples, eps, delta, decision_alpha))
        for idx in cands:
            events.append(_check(outcomes, idx, direction, num, den, samples, eps, delta, decision_alpha))

    worst_ratio = max(e.ratio for e in events)
    eps_lb = max(0.0, max(e.eps_lower_bound for e in events))
    return AuditReport(
        outcomes=list(outcomes), samples=samples, claimed=claimed, confidence=confidence,
        freq_a=(na / samples).tolist(), freq_b=(nb / samples).tolist(), ci_a=ci_a, ci_b=ci_b,
        events=events, worst_ratio=worst_ratio, epsilon_lower_bound=eps_lb,
        passed=not any(e.violated for e in events),
    )


def _bounds(num, den, idx, samples, alpha):
    cn, cd = int(num[idx].sum()), int(den[idx].sum())
    lo_num, _ = clopper_pearson(cn, samples, alpha)
    _, hi_den = clopper_pearson(cd, samples, alpha)
    return cn, cd, lo_num, hi_den


def _greedy_event(num, den, samples, eps, delta, alpha) -> list[int]:
    ratio = (num + 0.5) / (den + 0.5)
    order = np.argsort(-ratio, kind="stable")
    best, best_margin = [int(order[0])], -math.inf
    for j in range(1, len(order) + 1):
        idx = order[:j]
        _, _, lo, hi = _bounds(num, den, idx, samples, alpha)
        margin = lo - math.exp(eps) * hi - delta
        if margin > best_margin:
            best, best_margin = [int(i) for i in idx], margin
    return sorted(best)


def _check(outcomes, idx, direction, num, den, samples, eps, delta, alpha) -> EventCheck:
    cn, cd, lo, hi = _bounds(num, den, np.asarray(idx), samples, alpha)
    ratio = cn / cd if cd else (math.inf if cn else 1.0)
    eps_lb = math.log((lo - delta) / hi) if lo > delta else -math.inf
    return EventCheck(
        outcomes=tuple(outcomes[i] for i in idx), direction=direction,
        p_num=cn / samples, p_den=cd / samples, ratio=ratio,
        eps_lower_bound=eps_lb, violated=lo > math.exp(eps) * hi + delta,
    )


# ---------------------------------------------------------------------------
# default projections

def first_pick_mechanism(inst: CoverageInstance, eps_s: float, delta_s: float,
                         batched: bool = False) -> Callable:
    """Id of the first set chosen by the private coverage routine on a target set.

    The batched form draws many first picks from one marginal computation.
    """
    if batched:
        def run_batch(target, rng, size):
            return sample_first_picks(inst, target, eps_s, delta_s, rng, size)
        return run_batch

    def run(target, rng):
        return private_max_coverage(inst, target, eps_s, delta_s, 1, rng).chosen[0]
    return run


def noisy_count_mechanism(eps: float, reference: float, edges: Sequence[float] = (0.5,)) -> Callable:
    """Batched sensitivity-1 noisy count of a demand list.

    The outcome is the bucket index of ``noisy - reference`` for the bucket
    ``edges``; the default splits at ``reference + 0.5``.
    """
    edges = np.asarray(edges, dtype=np.float64)

    def run(dataset, rng, size):
        vals = noisy_count(len(dataset), 1.0, eps, rng, size)
        return np.searchsorted(edges, vals - reference, side="right")
    return run


def laplace_line_mechanism(centers: Sequence[int], epsilon_p: float, center: int, reference: float,
                           edges: Sequence[float] = (0.0,), budget_share: float = 0.5) -> Callable:
    """Batched noisy weight of one snapped center, bucketed.

    Runs the snapping and noisy-count steps of the clustering pipeline on a
    :class:`MetricInstance` with fixed candidate ``centers``.  The default
    edge at ``reference`` projects onto the sign of ``weight - reference``.
    """
    edges = np.asarray(edges, dtype=np.float64)

    def run(dataset, rng, size):
        counts = snap_and_count(dataset, centers)
        col = list(counts).index(center)
        w = noisy_weights(list(counts.values()), epsilon_p, rng, budget_share, samples=size)
        return np.searchsorted(edges, w[:, col] - reference, side="right")
    return run


def first_round_mechanism(epsilon: float, budget: PrivacyBudget) -> Callable:
    """Sorted multiset of centers picked in the first coverage round."""
    def run(dataset, rng):
        schedule = build_thresholds(diameter(dataset), dataset.n, epsilon)
        m = picks_per_round(dataset.k, epsilon)
        _, records = coverage_rounds(dataset, schedule, budget, m, rng, rounds=1)
        return tuple(sorted(records[0].chosen))
    return run
