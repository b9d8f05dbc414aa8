import itertools
import math

import numpy as np
import pytest

from dpcluster.metric import MetricInstance


def line_instance(xs, demand=None, k=1, power=1.0, **kw):
    xs = np.asarray(xs, dtype=float)
    return MetricInstance(coords=xs[:, None], demand=range(len(xs)) if demand is None else demand,
                          k=k, power=power, **kw)


def random_instance(seed, n=None, dim=2, k=None, power=1.0):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(5, 16))
    k = k or int(rng.integers(1, 4))
    coords = rng.uniform(0, 1, size=(n, dim))
    demand = np.sort(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
    return MetricInstance(coords=coords, demand=demand, k=min(k, n), power=power)


def exhaustive_opt(inst):
    """Independent optimum: plain-Python enumeration with math.dist."""
    pts = [tuple(row) for row in inst.coords]
    best = math.inf
    for combo in itertools.combinations(inst.candidates.tolist(), inst.k):
        cost = sum(min(math.dist(pts[d], pts[c]) for c in combo) ** inst.power for d in inst.demand.tolist())
        best = min(best, cost)
    return best


@pytest.fixture
def line4():
    return line_instance([0.0, 1.0, 2.0, 5.0])


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Records one PASS/FAIL line for an acceptance criterion."""
    def _report(name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
