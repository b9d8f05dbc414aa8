"""Point sets, distance oracles, powered costs, balls and diameters.

A :class:`MetricInstance` is either coordinate based (Euclidean distance
between rows of ``coords``) or matrix based (an explicit symmetric distance
table).  Demand is a multiset of point indices; the position of an index in
``demand`` is its *slot*, and slots are what coverage and balls operate on, so
duplicated demand points count once per copy.
"""
from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Sequence

import numpy as np

TRIANGLE_SAMPLES = 10_000
EXACT_DIAMETER_LIMIT = 20_000
_TRIANGLE_RTOL = 1e-9


class InputError(ValueError):
    """Raised on malformed or inconsistent inputs."""


@dataclasses.dataclass(frozen=True, eq=False)
class MetricInstance:
    """Immutable clustering instance.

    Attributes:
      coords: (n, d) coordinates, or None in matrix mode.
      matrix: (n, n) distance table, or None in Euclidean mode.
      demand: private multiset of point indices.
      k: number of centers to open.
      power: exponent p >= 1 applied to distances in the objective.
      candidates: point indices allowed as centers (defaults to every point).
    """

    coords: np.ndarray | None = None
    matrix: np.ndarray | None = None
    demand: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    k: int = 1
    power: float = 1.0
    candidates: np.ndarray | None = None

    def __post_init__(self):
        if (self.coords is None) == (self.matrix is None):
            raise InputError("exactly one of coords or matrix must be given")
        if self.coords is not None:
            coords = np.array(self.coords, dtype=np.float64)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.ndim != 2 or not np.all(np.isfinite(coords)):
                raise InputError("coords must be a finite (n, d) array")
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)
            n = coords.shape[0]
        else:
            matrix = np.array(self.matrix, dtype=np.float64)
            _check_matrix(matrix)
            matrix.setflags(write=False)
            object.__setattr__(self, "matrix", matrix)
            n = matrix.shape[0]
        if n == 0:
            raise InputError("empty point set")

        demand = np.array(self.demand, dtype=np.int64).reshape(-1)
        if demand.size and (demand.min() < 0 or demand.max() >= n):
            raise InputError(f"demand index out of range [0, {n})")
        demand.setflags(write=False)
        object.__setattr__(self, "demand", demand)

        if self.candidates is None:
            candidates = np.arange(n, dtype=np.int64)
        else:
            candidates = np.unique(np.array(self.candidates, dtype=np.int64).reshape(-1))
            if candidates.size == 0 or candidates[0] < 0 or candidates[-1] >= n:
                raise InputError("candidate indices must be nonempty and in range")
        candidates.setflags(write=False)
        object.__setattr__(self, "candidates", candidates)

        if int(self.k) != self.k or self.k < 1:
            raise InputError(f"k must be a positive integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if self.k > candidates.size:
            raise InputError(f"k={self.k} exceeds the {candidates.size} available centers")
        if not self.power >= 1:
            raise InputError(f"power must be >= 1, got {self.power}")
        object.__setattr__(self, "power", float(self.power))

    @property
    def n(self) -> int:
        return self.coords.shape[0] if self.coords is not None else self.matrix.shape[0]

    @property
    def euclidean(self) -> bool:
        return self.coords is not None

    def replace(self, **changes) -> MetricInstance:
        return dataclasses.replace(self, **changes)

    def pairwise(self, rows: Sequence[int] | np.ndarray, cols: Sequence[int] | np.ndarray) -> np.ndarray:
        """Un-powered distances between every row index and every column index."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.matrix is not None:
            return self.matrix[np.ix_(rows, cols)]
        a = self.coords[rows]
        b = self.coords[cols]
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@dataclasses.dataclass(frozen=True)
class ClusteringSolution:
    centers: tuple[int, ...]
    cost: float
    # demand slot -> assigned center (point index)
    assignment: tuple[int, ...]


def _check_matrix(matrix: np.ndarray) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InputError("distance matrix must be square")
    if not np.all(np.isfinite(matrix)):
        raise InputError("distance matrix has non-finite entries")
    bad = np.argwhere(matrix != matrix.T)
    if bad.size:
        i, j = bad[0]
        raise InputError(f"asymmetric matrix at ({i},{j}): {matrix[i, j]!r} != {matrix[j, i]!r}")
    bad = np.argwhere(matrix < 0)
    if bad.size:
        i, j = bad[0]
        raise InputError(f"negative distance at ({i},{j})")
    bad = np.flatnonzero(np.diag(matrix) != 0)
    if bad.size:
        raise InputError(f"nonzero diagonal at ({bad[0]},{bad[0]})")
    check_triangle(matrix)


def check_triangle(matrix: np.ndarray, samples: int = TRIANGLE_SAMPLES, seed: int = 0) -> None:
    """Checks d(a,b) <= d(a,c) + d(c,b); exhaustive when n^3 <= samples."""
    n = matrix.shape[0]
    if n ** 3 <= samples:
        a, b, c = (g.reshape(-1) for g in np.meshgrid(*(np.arange(n),) * 3, indexing="ij"))
    else:
        rng = np.random.default_rng(seed)
        a, b, c = rng.integers(0, n, size=(3, samples))
    lhs = matrix[a, b]
    rhs = matrix[a, c] + matrix[c, b]
    bad = np.flatnonzero(lhs > rhs * (1 + _TRIANGLE_RTOL) + 1e-12)
    if bad.size:
        i = bad[0]
        raise InputError(
            f"triangle inequality violated at ({a[i]},{b[i]},{c[i]}): "
            f"{lhs[i]!r} > {matrix[a[i], c[i]]!r} + {matrix[c[i], b[i]]!r}"
        )


def _check_index(inst: MetricInstance, *indices: int) -> None:
    for u in indices:
        if not 0 <= u < inst.n:
            raise InputError(f"point index {u} out of range [0, {inst.n})")


def distance(inst: MetricInstance, u: int, v: int) -> float:
    _check_index(inst, u, v)
    if inst.matrix is not None:
        return float(inst.matrix[u, v])
    return float(np.linalg.norm(inst.coords[u] - inst.coords[v]))


def powered_distance(inst: MetricInstance, u: int, v: int) -> float:
    return distance(inst, u, v) ** inst.power


def diameter(inst: MetricInstance, approximate: bool | None = None) -> float:
    """Maximum pairwise distance.

    With ``approximate=True`` (the default only above ``EXACT_DIAMETER_LIMIT``
    Euclidean points) a single farthest-point sweep from point 0 is used and
    twice the sweep radius is returned, an upper bound within a factor 2 of
    the true diameter.
    """
    n = inst.n
    if approximate is None:
        approximate = inst.euclidean and n > EXACT_DIAMETER_LIMIT
    if approximate:
        return 2.0 * float(inst.pairwise([0], np.arange(n)).max())
    if inst.matrix is not None:
        return float(inst.matrix.max())
    best = 0.0
    step = max(1, 4_000_000 // n)
    for start in range(0, n, step):
        block = inst.pairwise(np.arange(start, min(n, start + step)), np.arange(n))
        best = max(best, float(block.max()))
    return best


def _slots(inst: MetricInstance, restrict: Iterable[int] | None) -> np.ndarray:
    if restrict is None:
        return np.arange(inst.demand.size, dtype=np.int64)
    slots = np.fromiter(restrict, dtype=np.int64)
    if slots.size and (slots.min() < 0 or slots.max() >= inst.demand.size):
        raise InputError("demand slot out of range")
    return np.sort(slots)


def ball(inst: MetricInstance, center: int, radius: float,
         restrict: Iterable[int] | None = None) -> set[int]:
    """Demand slots from ``restrict`` within closed distance ``radius`` of ``center``."""
    if radius < 0:
        raise InputError("radius must be nonnegative")
    _check_index(inst, center)
    slots = _slots(inst, restrict)
    if slots.size == 0:
        return set()
    d = inst.pairwise([center], inst.demand[slots])[0]
    return set(slots[d <= radius].tolist())


def nearest(inst: MetricInstance, targets: np.ndarray, centers: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Nearest center (lowest index on ties) and un-powered distance for each target."""
    centers = np.unique(np.asarray(centers, dtype=np.int64))
    if centers.size == 0:
        raise InputError("centers must be nonempty")
    _check_index(inst, int(centers[0]), int(centers[-1]))
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    d = inst.pairwise(targets, centers)
    # centers are sorted, so argmin's first-hit rule is the lowest-index tie break
    j = np.argmin(d, axis=1)
    return centers[j], d[np.arange(targets.size), j]


def clustering_cost(inst: MetricInstance, centers: Iterable[int]) -> tuple[float, dict[int, int]]:
    """Sum over demand of the powered distance to the nearest center.

    Returns the cost and a mapping from demand slot to its assigned center.
    """
    centers = list(centers)
    if not centers:
        raise InputError("centers must be nonempty")
    assigned, d = nearest(inst, inst.demand, centers)
    cost = float(np.sum(d ** inst.power))
    return cost, dict(enumerate(assigned.tolist()))
