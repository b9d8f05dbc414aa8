import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import line_instance, random_instance
from dpcluster.metric import (
    InputError,
    MetricInstance,
    ball,
    clustering_cost,
    diameter,
    distance,
    powered_distance,
)


def test_distance_pythagorean():
    inst = MetricInstance(coords=[[0, 0], [3, 4]], demand=[0])
    assert distance(inst, 0, 1) == 5.0
    assert distance(inst, 1, 1) == 0.0


def test_distance_matrix_lookup():
    m = np.full((6, 6), 7.5)
    np.fill_diagonal(m, 0)
    inst = MetricInstance(matrix=m, demand=[0])
    assert distance(inst, 2, 5) == 7.5


def test_distance_out_of_range():
    inst = line_instance([0, 1])
    with pytest.raises(InputError):
        distance(inst, 0, 2)


@pytest.mark.parametrize("d, p, expected", [(5, 2, 25), (5, 1, 5), (2, 3, 8)])
def test_powered_distance(d, p, expected):
    inst = line_instance([0, d], power=p)
    assert powered_distance(inst, 0, 1) == pytest.approx(expected)


def test_diameter_small_cases():
    assert diameter(line_instance([3.0])) == 0
    assert diameter(line_instance([0, 3, 10])) == 10
    with pytest.raises(InputError):
        MetricInstance(coords=np.zeros((0, 2)))


def test_diameter_matches_pairwise_scan():
    inst = random_instance(7, n=50, dim=3)
    pts = [tuple(r) for r in inst.coords]
    oracle = max(math.dist(a, b) for a, b in itertools.combinations(pts, 2))
    assert diameter(inst) == pytest.approx(oracle, rel=1e-12)
    approx = diameter(inst, approximate=True)
    assert oracle <= approx <= 2 * oracle + 1e-12


def test_ball_examples(line4):
    assert ball(line4, 0, 2.0) == {0, 1, 2}
    assert ball(line4, 0, diameter(line4)) == {0, 1, 2, 3}
    dup = line_instance([0.0, 1.0], demand=[1, 0, 1])
    assert ball(dup, 0, 0.0, restrict={0, 1}) == {1}


def test_clustering_cost_examples():
    inst = line_instance([0, 1, 2, 3, 4], demand=[0, 4])
    assert clustering_cost(inst, [2])[0] == 4
    assert clustering_cost(inst.replace(power=2.0), [2])[0] == 8
    assert clustering_cost(inst, [0, 4])[0] == 0
    with pytest.raises(InputError):
        clustering_cost(inst, [])


def test_cost_ties_go_to_lowest_index():
    inst = line_instance([1.0, 0.0, 2.0], demand=[0])
    _, assignment = clustering_cost(inst, [2, 1])
    assert assignment == {0: 1}


def test_matrix_validation():
    bad = np.array([[0, 1, 2], [1, 0, 1], [2.5, 1, 0]])
    with pytest.raises(InputError, match=r"\(0,2\)"):
        MetricInstance(matrix=bad)
    tri = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    with pytest.raises(InputError, match="triangle"):
        MetricInstance(matrix=tri)


def test_instance_invariants():
    with pytest.raises(InputError):
        line_instance([0, 1], demand=[2])
    with pytest.raises(InputError):
        line_instance([0, 1], k=3)
    with pytest.raises(InputError):
        line_instance([0, 1], power=0.5)


coords3 = st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=3)


@given(st.tuples(coords3, coords3, coords3), st.sampled_from([1, 2, 3]))
def test_powered_triangle(triple, p):
    inst = MetricInstance(coords=np.array(triple), demand=[0], power=p)
    ab = powered_distance(inst, 0, 1)
    ac = powered_distance(inst, 0, 2)
    cb = powered_distance(inst, 2, 1)
    assert ab <= 2 ** (p - 1) * (ac + cb) * (1 + 1e-12) + 1e-9


def test_powered_triangle_tight_at_midpoint():
    inst = MetricInstance(coords=[[0.0, 0.0], [2.0, 2.0], [1.0, 1.0]], demand=[0], power=2)
    lhs = powered_distance(inst, 0, 1)
    rhs = 2 * (powered_distance(inst, 0, 2) + powered_distance(inst, 2, 1))
    assert abs(lhs - rhs) <= 1e-12


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.data())
def test_cost_monotone_under_superset(seed, data):
    inst = random_instance(seed)
    base = data.draw(st.sets(st.sampled_from(range(inst.n)), min_size=1))
    extra = data.draw(st.sets(st.sampled_from(range(inst.n))))
    assert clustering_cost(inst, base | extra)[0] <= clustering_cost(inst, base)[0] + 1e-12


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.floats(0, 2), st.floats(0, 2))
def test_balls_nested(seed, r1, r2):
    inst = random_instance(seed)
    lo, hi = sorted((r1, r2))
    assert ball(inst, 0, lo) <= ball(inst, 0, hi)
