"""NUTS on N(0, I6) over several seeds: pooled moments, R-hat, ESS, step size.

    python scripts/nuts_gaussian_check.py --seeds 10
"""

import argparse

import numpy as np

from rispose.sampler import GaussianTarget, NutsConfig, run_chains


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--dim", type=int, default=6)
    args = ap.parse_args()

    target = GaussianTarget(np.zeros(args.dim), np.eye(args.dim))
    print(f"{'seed':>4} {'max|mean|':>10} {'max|var-1|':>11} {'rhat':>7} {'min ess':>8} {'accept':>7} {'eps':>6}")
    for seed in range(args.seeds):
        s = run_chains(target, NutsConfig(n_chains=4, tune=500, draws=1000, seed=seed))
        pooled = s.draws.reshape(-1, args.dim)
        print(f"{seed:>4} {np.max(np.abs(pooled.mean(0))):10.4f} {np.max(np.abs(pooled.var(0, ddof=1) - 1)):11.4f} "
              f"{np.max(s.rhat):7.4f} {np.min(s.ess):8.0f} {s.accept_stats.mean():7.3f} {np.mean(s.step_size):6.3f}")


if __name__ == "__main__":
    main()
