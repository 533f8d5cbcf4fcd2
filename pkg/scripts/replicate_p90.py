"""Desk-scale campaign and its 90th-percentile errors beside the published ones.

    python scripts/replicate_p90.py --trials 200 --out results/desk

Uses configs/default.toml with the fast sampler preset unless --full is given.
"""

import argparse
from pathlib import Path

from rispose.harness import export, load_config, run_campaign
from rispose.sampler import NutsConfig

# published 90% CDF markers: metric -> ris -> sigma2 -> value
PUBLISHED = {
    "position": {"on": {1e-1: 3.91063, 1e-2: 1.57071, 1e-3: 0.53481, 1e-4: 0.14384, 1e-5: 0.03853},
                 "off": {1e-1: 6.44283, 1e-2: 5.55535, 1e-3: 4.53914, 1e-4: 2.47313, 1e-5: 0.87843}},
    "rotation": {"on": {1e-1: 0.43547, 1e-2: 0.19091, 1e-3: 0.06510, 1e-4: 0.01920, 1e-5: 0.00547},
                 "off": {1e-1: 0.63008, 1e-2: 0.47993, 1e-3: 0.43972, 1e-4: 0.42581, 1e-5: 0.42543}},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=Path(__file__).parents[1] / "configs" / "default.toml")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--sigma2", type=float, nargs="+")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--full", action="store_true", help="keep the config's sampler settings")
    ap.add_argument("--out", type=Path, default=Path("results/desk"))
    args = ap.parse_args()

    cfg = load_config(args.config)
    kw = {"n_trials": args.trials, "output_dir": args.out}
    if args.sigma2:
        kw["sigma2_list"] = tuple(args.sigma2)
    if args.seed is not None:
        kw["root_seed"] = args.seed
    if not args.full:
        kw["nuts"] = NutsConfig.fast()
    cfg = cfg.replace(**kw)

    table = run_campaign(cfg, progress=lambda r: print(
        f"sigma2={r.sigma2:g} ris={'on' if r.ris_on else 'off'} trial {r.index}: "
        f"{r.position_error:.4g} m {r.rotation_error:.4g} rad", flush=True))
    export(table, cfg.output_dir)
    print(f"\n{'metric':>9} {'ris':>4} {'sigma2':>7} {'p90':>9} {'published':>10} {'ratio':>6}")
    for (metric, on, s2), cell in table.cells.items():
        ref = PUBLISHED[metric]["on" if on else "off"].get(s2)
        ratio = f"{cell.p90 / ref:6.2f}" if ref else "     -"
        print(f"{metric:>9} {'on' if on else 'off':>4} {s2:>7.0e} {cell.p90:9.4g} "
              f"{ref if ref else float('nan'):10.4g} {ratio}")


if __name__ == "__main__":
    main()
