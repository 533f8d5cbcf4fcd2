"""PEB and REB against sigma2 at random poses, with and without the RIS.

    python scripts/bounds_sweep.py --poses 200 --out results/bounds_sweep.csv
"""

import argparse
from pathlib import Path

import numpy as np

from rispose.channel import Scenario
from rispose.crlb import bound_report
from rispose.harness import nearest_rank, random_pose
from rispose.harness.export import write_bounds_sweep

SIGMA2 = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--poses", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    sc = Scenario()
    rng = np.random.default_rng(args.seed)
    poses = [random_pose(sc, rng) for _ in range(args.poses)]
    rows = []
    print(f"{'sigma2':>7} {'ris':>4} {'median PEB':>11} {'p90 PEB':>9} {'median REB':>11} {'p90 REB':>9}")
    for s2 in SIGMA2:
        for on in (True, False):
            reps = [bound_report(p, sc.with_ris(on), s2) for p in poses]
            rows += [{"sigma2": s2, "ris": "on" if on else "off", "pose": p.as_vector(), **r.as_row()}
                     for p, r in zip(poses, reps)]
            peb = np.array([r.peb for r in reps])
            reb = np.array([r.reb for r in reps])
            print(f"{s2:>7.0e} {'on' if on else 'off':>4} {np.median(peb):11.4g} {nearest_rank(peb):9.4g} "
                  f"{np.median(reb):11.4g} {nearest_rank(reb):9.4g}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        print(f"wrote {write_bounds_sweep(rows, args.out)}")


if __name__ == "__main__":
    main()
