"""Private maximum coverage by repeated exponential-mechanism picks, and its greedy twin."""
from __future__ import annotations

import dataclasses
import functools
import math
from collections.abc import Hashable, Iterable, Sequence

import numpy as np

from .mechanisms import RandomSource, exponential_select
from .metric import InputError


@dataclasses.dataclass(frozen=True, eq=False)
class CoverageInstance:
    """A universe and an indexed family of subsets.

    The family is kept as a boolean incidence matrix (sets x elements) so that
    marginal coverage is one masked row sum per step.
    """

    elements: tuple[Hashable, ...]
    incidence: np.ndarray

    @classmethod
    def from_sets(cls, universe: Iterable[Hashable], family: Sequence[Iterable[Hashable]]) -> CoverageInstance:
        elements = tuple(sorted(set(universe), key=_sort_key))
        pos = {e: i for i, e in enumerate(elements)}
        incidence = np.zeros((len(family), len(elements)), dtype=bool)
        for s, members in enumerate(family):
            for e in members:
                if e not in pos:
                    raise InputError(f"set {s} has element {e!r} outside the universe")
                incidence[s, pos[e]] = True
        return cls(elements, incidence)

    @classmethod
    def from_incidence(cls, incidence: np.ndarray, elements: Sequence[Hashable] | None = None) -> CoverageInstance:
        incidence = np.asarray(incidence, dtype=bool)
        if elements is None:
            elements = range(incidence.shape[1])
        return cls(tuple(elements), incidence)

    @property
    def family_size(self) -> int:
        return self.incidence.shape[0]

    def family_set(self, s: int) -> set:
        return {self.elements[j] for j in np.flatnonzero(self.incidence[s])}

    @functools.cached_property
    def _position(self) -> dict:
        return {e: i for i, e in enumerate(self.elements)}

    def mask(self, subset: Iterable[Hashable]) -> np.ndarray:
        pos = self._position
        out = np.zeros(len(self.elements), dtype=bool)
        for e in subset:
            if e not in pos:
                raise InputError(f"target element {e!r} outside the universe")
            out[pos[e]] = True
        return out


def _sort_key(e):
    return (type(e).__name__, e)


@dataclasses.dataclass(frozen=True)
class CoverageSelection:
    """Picked set ids in order, plus non-private diagnostics.

    Only ``chosen`` may be released; ``covered`` and ``marginal_trace`` are
    computed from the private target.
    """

    chosen: tuple[int, ...]
    covered: frozenset
    marginal_trace: tuple[int, ...]
    eps_prime: float | None = None


def per_pick_epsilon(eps_s: float, delta_s: float) -> float:
    """eps' = eps_s / (2 ln(e / delta_s))."""
    if not eps_s > 0:
        raise InputError(f"eps_s must be > 0, got {eps_s}")
    if not 0 < delta_s <= 1:
        raise InputError(f"delta_s must lie in (0, 1], got {delta_s}")
    return eps_s / (2 * (1 - math.log(delta_s)))


def _marginals(inst: CoverageInstance, residual: np.ndarray, alive: np.ndarray):
    ids = np.flatnonzero(alive)
    return ids, inst.incidence[ids][:, residual].sum(axis=1)


def _run(inst: CoverageInstance, target, m: int, pick) -> CoverageSelection:
    if not 1 <= m <= inst.family_size:
        raise InputError(f"m={m} must lie in [1, {inst.family_size}]")
    residual = target.copy() if isinstance(target, np.ndarray) else inst.mask(target)
    alive = np.ones(inst.family_size, dtype=bool)
    chosen, trace = [], []
    covered = np.zeros_like(residual)
    for _ in range(m):
        ids, marginals = _marginals(inst, residual, alive)
        s = int(ids[pick(marginals)])
        newly = inst.incidence[s] & residual
        chosen.append(s)
        trace.append(int(newly.sum()))
        covered |= newly
        residual &= ~inst.incidence[s]
        alive[s] = False
    return CoverageSelection(
        chosen=tuple(chosen),
        covered=frozenset(inst.elements[j] for j in np.flatnonzero(covered)),
        marginal_trace=tuple(trace),
    )


def private_max_coverage(inst: CoverageInstance, target, eps_s: float, delta_s: float,
                         m: int, rng: RandomSource) -> CoverageSelection:
    """Picks m sets, each with probability proportional to exp(eps' * |S & R_i|).

    ``target`` is an iterable of elements or a boolean mask over
    ``inst.elements``.  Sets whose marginal is zero stay selectable.
    """
    eps_prime = per_pick_epsilon(eps_s, delta_s)
    sel = _run(inst, target, m, lambda marginals: exponential_select(marginals, eps_prime, rng))
    return dataclasses.replace(sel, eps_prime=eps_prime)


def sample_first_picks(inst: CoverageInstance, target, eps_s: float, delta_s: float,
                       rng: RandomSource, size: int) -> np.ndarray:
    """``size`` independent draws of the first pick of :func:`private_max_coverage`."""
    eps_prime = per_pick_epsilon(eps_s, delta_s)
    residual = target.copy() if isinstance(target, np.ndarray) else inst.mask(target)
    ids, marginals = _marginals(inst, residual, np.ones(inst.family_size, dtype=bool))
    return ids[exponential_select(marginals, eps_prime, rng, size=size)]


def greedy_max_coverage(inst: CoverageInstance, target, m: int) -> CoverageSelection:
    # np.argmax returns the first maximum, i.e. the lowest remaining set id
    return _run(inst, target, m, lambda marginals: int(np.argmax(marginals)))


def coverage_deficit(selection: CoverageSelection, target: Iterable[Hashable]) -> int:
    """Number of target elements left uncovered by ``selection``."""
    target = set(target)
    return len(target) - len(selection.covered & target)
