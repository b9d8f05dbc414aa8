import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import line_instance, random_instance
from dpcluster.clustering import (
    DiagnosticProfile,
    build_thresholds,
    dp_cluster,
    euclidean_candidate_provider,
    picks_per_round,
    snap_and_count,
    threshold_profile,
)
from dpcluster.instances import planted
from dpcluster.mechanisms import PrivacyBudget, RandomSource
from dpcluster.metric import InputError, MetricInstance, clustering_cost, diameter
from dpcluster.solvers import BruteForce, LocalSearch, Lloyd, WeightedInstance, brute_force_solver

OFF = PrivacyBudget(1e6, 1e-6)


def opt_of(inst):
    w = WeightedInstance(inst, inst.candidates, inst.demand, np.ones(inst.demand.size), inst.k, inst.power)
    return brute_force_solver(w)


def test_threshold_examples():
    s = build_thresholds(10.0, 10, 1.0)
    assert s.r == 5 and s.radii == (1.0, 2.0, 4.0, 8.0, 16.0)
    assert build_thresholds(0.0, 7, 0.3).radii == (0.0,)
    s = build_thresholds(1.0, 100, 0.5)
    assert s.r == 13
    assert s.radii[0] == pytest.approx(0.01)
    assert s.radii[-1] == pytest.approx(0.01 * 1.5 ** 12) and s.radii[-1] >= 1.0
    with pytest.raises(InputError):
        build_thresholds(1.0, 0, 0.5)


@settings(max_examples=100)
@given(st.floats(1e-6, 1e6), st.integers(1, 10_000), st.floats(0.01, 0.59))
def test_threshold_invariants(delta, n, eps):
    s = build_thresholds(delta, n, eps)
    assert s.radii[0] == pytest.approx(delta / n)
    assert np.allclose(np.diff(s.radii) / np.asarray(s.radii[:-1]), eps)
    assert s.r >= math.ceil(1 + math.log(n) / math.log1p(eps))
    assert s.radii[-1] >= delta


def test_picks_per_round():
    assert picks_per_round(3, 0.1) == math.ceil(6 * math.log(10))


def test_snap_and_count_examples():
    inst = line_instance([0.0, 4.0], demand=[0, 0, 1])
    assert snap_and_count(inst, [0, 1]) == {0: 2, 1: 1}
    assert snap_and_count(inst, [1]) == {1: 3}
    xs = np.arange(10.0) + 100
    xs[3], xs[7], xs[0] = 0.0, 2.0, 1.0
    assert snap_and_count(line_instance(xs, demand=[0]), [7, 3]) == {3: 1, 7: 0}
    with pytest.raises(InputError):
        snap_and_count(inst, [])


def test_profile_all_demand_at_centers():
    inst = line_instance([0.0, 1.0, 3.0, 7.0], demand=[0, 2, 2])
    s = build_thresholds(diameter(inst), inst.n, 0.5)
    prof = threshold_profile(inst, [0, 2], s)
    assert prof.o[0] == 3 and sum(prof.o) == 3
    assert prof.discretized_cost == pytest.approx(3 * 7.0 / 4)
    assert list(DiagnosticProfile.suffix([1, 2, 3])) == [6, 5, 3]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1.0, 2.0, 3.0]), st.sampled_from([0.1, 0.3, 0.5]),
       st.floats(0.01, 100))
def test_discretization_bound(seed, p, eps, scale):
    base = random_instance(seed, power=p)
    inst = base.replace(coords=base.coords * scale)
    s = build_thresholds(diameter(inst), inst.n, eps)
    rng = np.random.default_rng(seed)
    ref = rng.choice(inst.n, size=inst.k, replace=False)
    prof = threshold_profile(inst, ref, s)
    cost = clustering_cost(inst, ref)[0]
    assert sum(prof.o) == inst.demand.size
    assert prof.discretized_cost >= cost - 1e-9
    assert prof.discretized_cost <= (1 + eps) ** p * cost + diameter(inst) ** p + 1e-9


def test_candidate_provider():
    pts = np.array([[0.2, 0.2], [0.4, 0.1]])
    inst = euclidean_candidate_provider(pts, "grid", 1.0)
    assert inst.candidates.size == 1
    assert np.array_equal(inst.coords[inst.candidates[0]], [0.0, 0.0])
    ident = euclidean_candidate_provider(pts)
    assert list(ident.candidates) == [0, 1] and ident.power == 2.0
    with pytest.raises(InputError):
        euclidean_candidate_provider(pts, "grid", 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 2.0), st.integers(1, 3))
def test_grid_snap_within_half_diagonal(seed, h, dim):
    pts = np.random.default_rng(seed).uniform(-3, 3, size=(15, dim))
    inst = euclidean_candidate_provider(pts, "grid", h)
    d = inst.pairwise(inst.demand, inst.candidates).min(axis=1)
    assert np.all(d <= h * math.sqrt(dim) / 2 + 1e-12)


def test_dp_cluster_privacy_off_planted():
    inst = planted(3, 30, 10.0, 0.5, 2, seed=1)
    sol, noisy, log = dp_cluster(inst, 0.1, OFF, BruteForce(), RandomSource(0))
    assert sol.cost <= 2 * opt_of(inst).cost + 1e-3
    assert len(sol.centers) == 3


def test_dp_cluster_k_equals_n():
    inst = planted(2, 8, 5.0, 0.5, 2, seed=4, k=8)
    sol, _, _ = dp_cluster(inst, 0.1, OFF, BruteForce(), RandomSource(0))
    assert sol.cost <= diameter(inst) * 1.1


def test_dp_cluster_deterministic():
    inst = random_instance(3, n=12, k=2)
    a = dp_cluster(inst, 0.2, PrivacyBudget(1.0, 1e-3), BruteForce(), RandomSource(9))
    b = dp_cluster(inst, 0.2, PrivacyBudget(1.0, 1e-3), BruteForce(), RandomSource(9))
    assert a[0] == b[0] and a[1] == b[1]
    assert a[2].releasable() == b[2].releasable()


def test_dp_cluster_degenerate_diameter():
    inst = MetricInstance(coords=np.zeros((4, 2)), demand=[0, 1, 1], k=2)
    sol, noisy, log = dp_cluster(inst, 0.1, PrivacyBudget(1.0, 1e-3), BruteForce(), RandomSource(0))
    assert sol.cost == 0 and len(sol.centers) == 2
    assert [e["step"] for e in log.budget_ledger] == ["laplace_counts"]


def test_dp_cluster_errors():
    inst = random_instance(0, n=8, k=2)
    with pytest.raises(InputError):
        dp_cluster(inst, 0.6, OFF, BruteForce(), RandomSource(0))
    with pytest.raises(InputError):
        dp_cluster(inst, 0.1, PrivacyBudget(1.0, 0.0), BruteForce(), RandomSource(0))
    with pytest.raises(InputError):
        dp_cluster(inst.replace(power=2.0), 0.1, OFF, LocalSearch(), RandomSource(0))


def _check_run(inst, eps, budget, solver, seed):
    sol, noisy, log = dp_cluster(inst, eps, budget, solver, RandomSource(seed))
    m = picks_per_round(inst.k, eps)
    # budget accounting
    assert sum(e["epsilon"] for e in log.budget_ledger) == pytest.approx(budget.epsilon_p)
    assert max(e["delta"] for e in log.budget_ledger) == budget.delta_p
    # center count bound
    assert len(noisy.centers) <= log.schedule.r * m
    assert noisy.clamped_weights == tuple(max(0.0, w) for w in noisy.weights)
    assert sum(log.counts) == inst.demand.size
    return sol, noisy, log


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.1, 0.3, 0.5]), st.floats(0.1, 10))
def test_pipeline_invariants(seed, eps, eps_p):
    inst = random_instance(seed, n=10)
    _check_run(inst, eps, PrivacyBudget(eps_p, 1e-3), BruteForce(), seed)


def _max_cover(dist_vd, residual, radius, k):
    balls = dist_vd <= radius
    best = 0
    for combo in itertools.combinations(range(dist_vd.shape[0]), min(k, dist_vd.shape[0])):
        best = max(best, int((balls[list(combo)].any(axis=0) & residual).sum()))
    return best


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("p", [1.0, 2.0])
def test_round_coverage_noise_free(seed, p):
    inst = random_instance(seed, n=int(12 + seed), k=2, power=p)
    eps = 0.3
    _, _, log = _check_run(inst, eps, OFF, BruteForce(), seed)
    dist_vd = inst.pairwise(inst.candidates, inst.demand)
    for rec in log.rounds:
        residual = np.zeros(inst.demand.size, dtype=bool)
        residual[list(rec.residual_before)] = True
        m_i = _max_cover(dist_vd, residual, rec.radius, inst.k)
        assert rec.newly_covered >= (1 - eps) * m_i


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("p", [1.0, 2.0])
def test_snapped_noisy_decomposition(seed, p):
    inst = random_instance(100 + seed, n=12, k=2, power=p)
    sol, noisy, log = _check_run(inst, 0.2, PrivacyBudget(2.0, 1e-3), BruteForce(), seed)
    opt = opt_of(inst)
    picked = sorted({c for r in log.rounds for c in r.chosen})
    prof = threshold_profile(inst, opt.centers, log.schedule, snapped_centers=picked)
    radii = np.asarray(log.schedule.radii)
    shift = float(np.asarray(prof.a) @ radii ** p)
    assert prof.snap_cost <= shift + 1e-9
    laplace = float(np.abs(np.asarray(noisy.weights) - np.asarray(log.counts)).sum()) * log.diameter ** p
    snapped = WeightedInstance(inst, inst.candidates, list(noisy.centers), noisy.clamped_weights, inst.k, p)
    noisy_opt = brute_force_solver(snapped).cost
    c = 2 ** (p - 1)
    assert noisy_opt <= c * (opt.cost + shift) + laplace + 1e-9


def test_lloyd_pipeline_p2():
    inst = planted(3, 30, 10.0, 0.5, 2, seed=2, power=2.0)
    sol, _, _ = _check_run(inst, 0.1, OFF, Lloyd(), 0)
    assert sol.cost <= 4 * opt_of(inst).cost
