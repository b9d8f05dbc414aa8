"""Experiment configuration and the seeded multi-trial runner."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .clustering import dp_cluster, euclidean_candidate_provider, threshold_profile
from .instances import generate, ingest, parse_spec
from .mechanisms import PrivacyBudget, RandomSource
from .metric import InputError, MetricInstance
from .solvers import BRUTE_FORCE_GUARD, WeightedInstance, brute_force_feasible, brute_force_solver, make_solver


@dataclasses.dataclass
class ExperimentConfig:
    seed: int
    k: int = 2
    power: float = 1.0
    epsilon: float = 0.1
    epsilon_p: float = 1.0
    delta_p: float = 1e-6
    solver: str = "brute_force"
    solver_params: dict = dataclasses.field(default_factory=dict)
    trials: int = 1
    jobs: int = 1
    input: str | None = None
    format: str | None = None
    generator: str | None = None
    candidates: str = "identity"
    grid_h: float | None = None
    fresh_instances: bool = False
    out: str | None = None

    def __post_init__(self):
        if self.seed is None:
            raise InputError("a seed is required")
        if (self.input is None) == (self.generator is None):
            raise InputError("give exactly one of input or generator")
        if self.fresh_instances and self.generator is None:
            raise InputError("fresh instances per trial need a generator")
        if self.trials < 1 or self.jobs < 1:
            raise InputError("trials and jobs must be >= 1")
        PrivacyBudget(self.epsilon_p, self.delta_p).require_approximate()
        if self.generator is not None:
            parse_spec(self.generator)


def load_instance(cfg: ExperimentConfig, trial: int | None = None) -> MetricInstance:
    if cfg.input is not None:
        inst = ingest(cfg.input, cfg.format, k=cfg.k, power=cfg.power)
    else:
        name, kwargs = parse_spec(cfg.generator)
        base_seed = kwargs.pop("seed", cfg.seed)
        seed = base_seed if trial is None else int(np.random.SeedSequence([base_seed, trial]).generate_state(1)[0])
        kwargs.pop("k", None)
        inst = generate((name, kwargs), seed=seed, k=cfg.k, power=cfg.power)
    if cfg.candidates != "identity":
        if not inst.euclidean:
            raise InputError("candidate providers need coordinates")
        inst = euclidean_candidate_provider(inst.coords, cfg.candidates, cfg.grid_h, inst.demand,
                                            k=cfg.k, power=cfg.power)
    return inst


def optimum(inst: MetricInstance, guard: int = BRUTE_FORCE_GUARD):
    """Exact optimum of the non-private instance, or None past the guard."""
    if not brute_force_feasible(inst.candidates.size, inst.k, guard):
        return None
    w = WeightedInstance(inst, inst.candidates, inst.demand, np.ones(inst.demand.size), inst.k, inst.power)
    return brute_force_solver(w, guard=guard)


def run_trial(cfg: ExperimentConfig, trial: int, shared: MetricInstance | None) -> tuple[dict, dict]:
    inst = shared if shared is not None else load_instance(cfg, trial)
    solver = make_solver(cfg.solver, **cfg.solver_params)
    rng = RandomSource(cfg.seed).substream(trial)
    budget = PrivacyBudget(cfg.epsilon_p, cfg.delta_p)
    solution, noisy, log = dp_cluster(inst, cfg.epsilon, budget, solver, rng)

    opt = optimum(inst)
    reference = opt.centers if opt is not None else solution.centers
    snapped = sorted({c for r in log.rounds for c in r.chosen}) or list(noisy.centers)
    profile = threshold_profile(inst, reference, log.schedule, snapped_centers=snapped)

    releasable = {"trial": trial, "centers": list(solution.centers), **log.releasable()}
    evaluation = {
        "trial": trial,
        "true_cost": solution.cost,
        "opt": opt.cost if opt is not None else "skipped(guard)",
        "opt_centers": list(opt.centers) if opt is not None else None,
        "profile": {**dataclasses.asdict(profile), "reference": "opt" if opt is not None else "solution"},
        "budget_ledger": log.budget_ledger,
        **log.evaluation(),
    }
    return releasable, evaluation


def _quartiles(values) -> dict:
    if not values:
        return {}
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return {"q1": float(q1), "median": float(med), "q3": float(q3),
            "min": float(min(values)), "max": float(max(values))}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Runs ``cfg.trials`` seeded trials; the report is a pure function of ``cfg``."""
    shared = None if cfg.fresh_instances else load_instance(cfg)
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        results = list(pool.map(lambda t: run_trial(cfg, t, shared), range(cfg.trials)))
    rel = [r for r, _ in results]
    ev = [e for _, e in results]
    costs = [e["true_cost"] for e in ev]
    ratios = [e["true_cost"] / e["opt"] for e in ev if isinstance(e["opt"], float) and e["opt"] > 0]
    return {
        "config": dataclasses.asdict(cfg),
        "releasable": {"trials": rel, "noisy_cost": _quartiles([r["noisy_cost"] for r in rel])},
        "evaluation": {"trials": ev, "true_cost": _quartiles(costs), "ratio_to_opt": _quartiles(ratios)},
    }
