"""Command line: ``rispose {bounds,trial,campaign,validate}``.

Exit codes: 0 success, 1 a check or run failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..crlb import ZETA_NAMES, bound_report
from ..sampler import NutsConfig
from .campaign import HarnessError, pose_grid, run_campaign, run_trial
from .config import CampaignConfig, ConfigError, load_config
from .export import ExportError, export, write_bounds_sweep
from .validate import run_all

BOUNDS_SIGMA2 = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="campaign TOML file")
    p.add_argument("--sigma2", type=float, action="append",
                   help="CE error variance; repeat for several values")
    p.add_argument("--no-ris", action="store_true", help="BS-MS link only")
    p.add_argument("--out", type=Path, help="output path")


def _nuts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--fast", action="store_true",
                   help="1 chain x (500 warm-up + 500 draws) with diagonal mass adaptation")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rispose", description="RIS-aided 6D pose estimation: bounds, trials and campaigns.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bounds", help="PEB/REB over a pose grid (no sampling)")
    _common(b)
    b.add_argument("--grid", type=int, nargs=2, default=(5, 2), metavar=("NXY", "NZ"))

    t = sub.add_parser("trial", help="one trial, verbose")
    _common(t)
    _nuts(t)

    c = sub.add_parser("campaign", help="full (sigma2, RIS) grid with exports")
    _common(c)
    _nuts(c)
    c.add_argument("--trials", type=int, help="trials per cell")
    c.add_argument("--workers", type=int, help="parallel trials")
    c.add_argument("--quiet", action="store_true")

    sub.add_parser("validate", help="run the oracle suites")
    return parser


def _config(args) -> CampaignConfig:
    cfg = load_config(args.config) if args.config else CampaignConfig()
    kw = {}
    if args.sigma2:
        kw["sigma2_list"] = tuple(args.sigma2)
    if args.no_ris:
        kw["ris_modes"] = ("off",)
    if getattr(args, "seed", None) is not None:
        kw["root_seed"] = args.seed
    if getattr(args, "fast", False):
        kw["nuts"] = NutsConfig.fast(max_tree_depth=cfg.nuts.max_tree_depth,
                                     target_accept=cfg.nuts.target_accept)
    if getattr(args, "trials", None) is not None:
        kw["n_trials"] = args.trials
    if getattr(args, "workers", None) is not None:
        kw["workers"] = args.workers
    if args.out is not None:
        kw["output_dir"] = args.out
    return cfg.replace(**kw) if kw else cfg


def _cmd_bounds(args) -> int:
    cfg = _config(args)
    sigma2_list = tuple(args.sigma2) if args.sigma2 else BOUNDS_SIGMA2
    modes = (False,) if args.no_ris else (True, False)
    rows = []
    print(f"{'sigma2':>8} {'ris':>4} {'x':>6} {'y':>6} {'z':>5} {'PEB (m)':>11} {'REB (rad)':>11} rank")
    for pose in pose_grid(cfg.scenario, *args.grid):
        for on in modes:
            sc = cfg.scenario.with_ris(on)
            for s2 in sigma2_list:
                r = bound_report(pose, sc, s2)
                rows.append({"sigma2": s2, "ris": "on" if on else "off", "pose": pose.as_vector(),
                             **r.as_row()})
                x, y, z = pose.position
                print(f"{s2:>8.0e} {'on' if on else 'off':>4} {x:6.2f} {y:6.2f} {z:5.2f} "
                      f"{r.peb:11.4g} {r.reb:11.4g} {r.fim_rank}")
    if args.out:
        path = args.out / "bounds_sweep.csv" if args.out.suffix != ".csv" else args.out
        path.parent.mkdir(parents=True, exist_ok=True)
        print(f"wrote {write_bounds_sweep(rows, path)}")
    return 0


def _cmd_trial(args) -> int:
    cfg = _config(args)
    sigma2 = args.sigma2[0] if args.sigma2 else 1e-3
    on = not args.no_ris
    rng = np.random.default_rng(cfg.root_seed)
    res = run_trial(cfg.scenario, sigma2, on, cfg, rng)
    print(f"sigma2={sigma2:g} ris={'on' if on else 'off'} seed={cfg.root_seed}")
    print("truth   " + " ".join(f"{n}={v:.4f}" for n, v in zip(ZETA_NAMES, res.true_pose.as_vector())))
    if not res.ok:
        print(f"sampler failure: {res.failure}")
        return 1
    est = res.estimate
    print("mean    " + " ".join(f"{n}={v:.4f}" for n, v in zip(ZETA_NAMES, est.pose_mean.as_vector())))
    rep = bound_report(res.true_pose, cfg.scenario.with_ris(on), sigma2)
    print(f"position error {est.position_error:.4g} m (PEB {rep.peb:.4g})")
    print(f"rotation error {est.rotation_error:.4g} rad (REB {rep.reb:.4g})")
    print(f"max rhat {res.rhat_max:.4f}, divergences {res.divergences}, {res.wall_time:.1f} s")
    return 0


def _cmd_campaign(args) -> int:
    cfg = _config(args)
    total = cfg.n_trials * len(cfg.sigma2_list) * len(cfg.ris_modes)
    done = [0]

    def progress(r):
        done[0] += 1
        if not args.quiet:
            err = f"{r.position_error:.4g} m, {r.rotation_error:.4g} rad" if r.ok else r.failure
            print(f"[{done[0]}/{total}] sigma2={r.sigma2:g} ris={'on' if r.ris_on else 'off'} "
                  f"trial {r.index}: {err} ({r.wall_time:.1f} s)", flush=True)

    table = run_campaign(cfg, progress)
    export(table, cfg.output_dir)
    print(f"{'metric':>9} {'ris':>4} {'sigma2':>8} {'p90':>10} {'median':>10} {'n':>5} failed")
    for (metric, on, s2), c in table.cells.items():
        print(f"{metric:>9} {'on' if on else 'off':>4} {s2:>8.0e} {c.p90:10.4g} {c.median:10.4g} "
              f"{c.n:5d} {c.n_failed}")
    print(f"outputs in {cfg.output_dir}")
    return 0


def _cmd_validate(args) -> int:
    results = run_all()
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"bounds": _cmd_bounds, "trial": _cmd_trial,
               "campaign": _cmd_campaign, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"rispose: config error: {exc}", file=sys.stderr)
        return 2
    except (HarnessError, ExportError, OSError) as exc:
        print(f"rispose: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
