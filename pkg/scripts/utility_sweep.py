"""Median true cost / OPT of the private pipeline across privacy budgets.

    python3 scripts/utility_sweep.py --seed 0 --trials 10 --power 1
"""
import argparse
import json

from dpcluster.experiment import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--power", type=float, default=1.0)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--generator", default="planted:k_star=3,n=30,separation=10,noise_sd=0.5,dim=2")
    ap.add_argument("--budgets", type=float, nargs="+", default=[0.1, 0.5, 1, 2, 5, 10, 100, 1e6])
    args = ap.parse_args()

    solver = "brute_force" if args.power == 1 else "lloyd"
    rows = []
    for eps_p in args.budgets:
        cfg = ExperimentConfig(seed=args.seed, k=3, power=args.power, epsilon=args.epsilon, epsilon_p=eps_p,
                               delta_p=1e-6, solver=solver, trials=args.trials, generator=args.generator,
                               fresh_instances=True)
        ev = run_experiment(cfg)["evaluation"]
        rows.append({"epsilon_p": eps_p, "ratio_to_opt": ev["ratio_to_opt"]})
        q = ev["ratio_to_opt"]
        print(f"eps_p={eps_p:>9g}  cost/OPT median={q['median']:.3f}  IQR=[{q['q1']:.3f}, {q['q3']:.3f}]")
    print(json.dumps(rows, default=float))


if __name__ == "__main__":
    main()
