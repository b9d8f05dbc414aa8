"""Differentially private k-medians / k-means via threshold-sweep private coverage."""
from .clustering import (
    DiagnosticProfile,
    NoisyWeightedInstance,
    ThresholdSchedule,
    build_thresholds,
    dp_cluster,
    euclidean_candidate_provider,
    snap_and_count,
    threshold_profile,
)
from .coverage import (
    CoverageInstance,
    CoverageSelection,
    coverage_deficit,
    greedy_max_coverage,
    private_max_coverage,
)
from .instances import generate, ingest, line, planted, uniform
from .mechanisms import PrivacyBudget, RandomSource, exponential_select, laplace_sample, noisy_count
from .metric import (
    ClusteringSolution,
    InputError,
    MetricInstance,
    ball,
    clustering_cost,
    diameter,
    distance,
    powered_distance,
)
from .solvers import (
    WeightedInstance,
    brute_force_solver,
    local_search_solver,
    lloyd_weighted_solver,
    make_solver,
)

__version__ = "0.1.0"
