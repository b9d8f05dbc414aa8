"""Command line entry point: cluster, bench, audit, generate, validate.

Every flag may also be set through an environment variable named
``DPCLUSTER_<FLAG>`` (upper case, dashes as underscores); explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import audit as audit_mod
from .coverage import CoverageInstance, per_pick_epsilon
from .experiment import ExperimentConfig, run_experiment
from .instances import dumps, export, generate, ingest
from .mechanisms import PrivacyBudget, RandomSource
from .metric import MetricInstance, diameter

ENV_PREFIX = "DPCLUSTER_"


def _env(flag: str, default=None):
    return os.environ.get(ENV_PREFIX + flag.lstrip("-").replace("-", "_").upper(), default)


def _add(p: argparse.ArgumentParser, flag: str, **kw):
    default = kw.pop("default", None)
    env = _env(flag)
    if env is not None:
        default = env
        kw.pop("required", None)
    p.add_argument(flag, default=default, **kw)


def _experiment_flags(p: argparse.ArgumentParser, require_generator: bool = False):
    _add(p, "--k", type=int, default=2)
    _add(p, "--power", type=float, default=1.0)
    _add(p, "--epsilon", type=float, default=0.1, help="utility parameter in (0, 0.6)")
    _add(p, "--epsilon-p", type=float, default=1.0)
    _add(p, "--delta-p", type=float, default=1e-6)
    _add(p, "--solver", default="brute_force", choices=["brute_force", "local_search", "lloyd"])
    _add(p, "--solver-params", default="{}", help="JSON object of solver keyword arguments")
    _add(p, "--seed", type=int, required=True)
    _add(p, "--trials", type=int, default=1)
    _add(p, "--jobs", type=int, default=1)
    _add(p, "--candidates", default="identity", choices=["identity", "grid"])
    _add(p, "--grid-h", type=float)
    _add(p, "--out")
    if require_generator:
        _add(p, "--generator", required=True, help="e.g. planted:k_star=3,n=30,separation=10,noise_sd=0.5,dim=2")
    else:
        _add(p, "--input")
        _add(p, "--format", choices=["csv", "json"])
        _add(p, "--generator")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpcluster", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="private clustering of one instance")
    _experiment_flags(p)

    p = sub.add_parser("bench", help="private clustering over freshly generated instances")
    _experiment_flags(p, require_generator=True)

    p = sub.add_parser("audit", help="Monte Carlo privacy audit of a built-in mechanism")
    _add(p, "--mechanism", default="first-pick",
         choices=["first-pick", "laplace", "laplace-misbudget", "first-round"])
    _add(p, "--epsilon-p", type=float, default=1.0)
    _add(p, "--delta-p", type=float, default=1e-6)
    _add(p, "--samples", type=int, default=100_000)
    _add(p, "--seed", type=int, required=True)
    _add(p, "--out")

    p = sub.add_parser("generate", help="write a synthetic instance")
    _add(p, "--generator", required=True)
    _add(p, "--seed", type=int, required=True)
    _add(p, "--format", choices=["csv", "json"])
    _add(p, "--out", required=True)

    p = sub.add_parser("validate", help="check an instance file and summarise it")
    p.add_argument("path")
    _add(p, "--format", choices=["csv", "json"])
    return parser


def _config(args, fresh: bool) -> ExperimentConfig:
    return ExperimentConfig(
        seed=args.seed, k=args.k, power=args.power, epsilon=args.epsilon,
        epsilon_p=args.epsilon_p, delta_p=args.delta_p, solver=args.solver,
        solver_params=json.loads(args.solver_params), trials=args.trials, jobs=args.jobs,
        input=getattr(args, "input", None), format=getattr(args, "format", None),
        generator=args.generator, candidates=args.candidates, grid_h=args.grid_h,
        fresh_instances=fresh, out=args.out,
    )


def _emit(doc, out: str | None):
    text = dumps(doc) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run_audit(mechanism: str, epsilon_p: float, delta_p: float, samples: int, seed: int):
    """Audits one of the built-in mechanisms on a fixed tiny neighbor pair."""
    rng = RandomSource(seed)
    if mechanism == "first-pick":
        inst = CoverageInstance.from_sets(range(6), [{0, 1, 2}, {2, 3}, {4}, {0, 5}])
        pair = audit_mod.NeighborPair([0, 1, 3, 4], [0, 1, 2, 3, 4])
        eps_s = epsilon_p / 2
        claimed = PrivacyBudget(per_pick_epsilon(eps_s, delta_p), 0.0)
        mech = audit_mod.first_pick_mechanism(inst, eps_s, delta_p, batched=True)
        return audit_mod.audit(mech, pair, samples, claimed, rng, outcomes=range(4), batched=True)
    if mechanism in ("laplace", "laplace-misbudget"):
        coords = np.array([[0.0], [1.0], [5.0]])
        base = MetricInstance(coords=coords, demand=[0, 0, 1, 2])
        variant = MetricInstance(coords=coords, demand=[0, 0, 0, 1, 2])
        share = 0.5 if mechanism == "laplace" else 1.0
        edges = np.arange(-4.5, 6.5)
        mech = audit_mod.laplace_line_mechanism([0, 2], epsilon_p, center=0, reference=2.0,
                                                edges=edges, budget_share=share)
        claimed = PrivacyBudget(epsilon_p / 2, 0.0)
        return audit_mod.audit(mech, audit_mod.NeighborPair(base, variant), samples, claimed, rng,
                               outcomes=range(len(edges) + 1), batched=True)
    if mechanism == "first-round":
        coords = np.array([[0.0], [1.0], [4.0]])
        base = MetricInstance(coords=coords, demand=[0, 1, 2], k=1)
        variant = MetricInstance(coords=coords, demand=[0, 1], k=1)
        budget = PrivacyBudget(epsilon_p, delta_p)
        mech = audit_mod.first_round_mechanism(0.5, budget)
        return audit_mod.audit(mech, audit_mod.NeighborPair(base, variant), samples,
                               PrivacyBudget(epsilon_p / 2, delta_p), rng)
    raise ValueError(f"unknown mechanism {mechanism!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("cluster", "bench"):
            cfg = _config(args, fresh=args.command == "bench")
            _emit(run_experiment(cfg), cfg.out)
        elif args.command == "audit":
            report = run_audit(args.mechanism, args.epsilon_p, args.delta_p, args.samples, args.seed)
            _emit({"mechanism": args.mechanism, **report.to_dict()}, args.out)
        elif args.command == "generate":
            export(generate(args.generator, seed=args.seed), args.out, args.format)
        elif args.command == "validate":
            inst = ingest(args.path, args.format)
            _emit({
                "valid": True, "n": inst.n, "mode": "euclidean" if inst.euclidean else "matrix",
                "dim": inst.coords.shape[1] if inst.euclidean else None,
                "demand_size": int(inst.demand.size), "diameter": diameter(inst),
            }, None)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a structured error
        sys.stderr.write(dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
