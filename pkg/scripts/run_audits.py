"""Runs every built-in privacy audit and prints the verdicts.

    python3 scripts/run_audits.py --seed 0 --samples 1000000
"""
import argparse

from dpcluster.cli import run_audit

MECHANISMS = ("first-pick", "laplace", "laplace-misbudget", "first-round")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--epsilon-p", type=float, default=10.0)
    ap.add_argument("--delta-p", type=float, default=1e-3)
    args = ap.parse_args()
    for name in MECHANISMS:
        # the sequential first-round audit is slow; cap it
        samples = min(args.samples, 30_000) if name == "first-round" else args.samples
        rep = run_audit(name, args.epsilon_p, args.delta_p, samples, args.seed)
        print(f"{name:<18} claim eps={rep.claimed.epsilon_p:.4f} delta={rep.claimed.delta_p:g}  "
              f"worst ratio={rep.worst_ratio:.3f}  eps lower bound={rep.epsilon_lower_bound:.3f}  {rep.verdict}")


if __name__ == "__main__":
    main()
