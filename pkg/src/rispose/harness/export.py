"""Write a ResultTable to CSV/JSON plus a plot script that reads them back.

Floats are written with ``repr`` so every value round-trips exactly.
Wall-clock times go to ``timings.csv``; ``trials.csv`` is a pure function of
the configuration and root seed.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .campaign import METRICS, ResultTable

ZETA = ("x", "y", "z", "alpha", "beta", "gamma")

TRIAL_COLUMNS = (
    ["sigma2", "ris", "trial"]
    + [f"true_{n}" for n in ZETA]
    + [f"est_{n}" for n in ZETA]
    + ["position_error", "rotation_error", "rhat_max", "divergences", "peb", "reb", "status"]
)


class ExportError(OSError):
    pass


def _f(v) -> str:
    return repr(float(v))


def sigma_label(sigma2: float) -> str:
    return f"{sigma2:g}"


def _ris(on: bool) -> str:
    return "on" if on else "off"


def _write_csv(path: Path, header, rows) -> Path:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _trial_rows(results: ResultTable):
    for sigma2 in results.sigma2_list:
        for mode in results.ris_modes:
            on = mode == "on"
            bnds = results.bounds.get((sigma2, on))
            for j, t in enumerate(results.cell_trials(sigma2, on)):
                est = t.estimate.pose_mean.as_vector() if t.ok else [math.nan] * 6
                peb, reb = bnds[j] if bnds else (math.nan, math.nan)
                yield [
                    _f(sigma2), mode, t.index,
                    *(_f(v) for v in t.true_pose.as_vector()),
                    *(_f(v) for v in est),
                    _f(t.position_error), _f(t.rotation_error), _f(t.rhat_max), t.divergences,
                    _f(peb), _f(reb), "ok" if t.ok else t.failure,
                ]


def summary_dict(results: ResultTable) -> dict:
    """Table-II layout: metric -> RIS mode -> sigma2 label -> p90, plus flat cells."""
    table = {m: {mode: {} for mode in results.ris_modes} for m in METRICS}
    cells = []
    for (metric, on, sigma2), c in results.cells.items():
        table[metric][_ris(on)][sigma_label(sigma2)] = c.p90
        cells.append({
            "metric": metric, "ris": _ris(on), "sigma2": sigma2,
            "p90": c.p90, "median": c.median, "n": c.n, "n_failed": c.n_failed,
        })
    return {"percentile": "nearest-rank 90th", "p90": table, "cells": cells}


def export(results: ResultTable, directory) -> list[Path]:
    """Write every output file into ``directory``; returns the paths written."""
    if not results.trials:
        raise ValueError("nothing to export: the result table is empty")
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {out}: {exc.strerror or exc}") from exc
    paths = [_write_csv(out / "trials.csv", TRIAL_COLUMNS, _trial_rows(results))]
    paths.append(_write_csv(
        out / "timings.csv", ["sigma2", "ris", "trial", "wall_time"],
        ([_f(t.sigma2), _ris(t.ris_on), t.index, _f(t.wall_time)] for t in results.trials),
    ))
    for (metric, on, sigma2), c in results.cells.items():
        name = f"cdf_{metric}_{_ris(on)}_{sigma_label(sigma2)}.csv"
        paths.append(_write_csv(out / name, ["error", "cdf"],
                                ([_f(x), _f(p)] for x, p in zip(c.cdf_x, c.cdf_p))))
    bound_rows = []
    for (sigma2, on), vals in results.bounds.items():
        for t, (peb, reb) in zip(results.cell_trials(sigma2, on), vals):
            bound_rows.append([_f(sigma2), _ris(on), t.index,
                               *(_f(v) for v in t.true_pose.as_vector()), _f(peb), _f(reb)])
    paths.append(_write_csv(out / "bounds.csv",
                            ["sigma2", "ris", "trial", *ZETA, "peb", "reb"], bound_rows))
    summary = out / "summary.json"
    try:
        summary.write_text(json.dumps(summary_dict(results), indent=2, allow_nan=True) + "\n")
        plot = out / "plot_results.py"
        plot.write_text(PLOT_SCRIPT)
    except OSError as exc:
        raise ExportError(f"cannot write into {out}: {exc.strerror or exc}") from exc
    return paths + [summary, plot]


def write_bounds_sweep(rows: list[dict], path) -> Path:
    """CSV for a ``bounds`` sweep: pose, sigma2, ris, peb, reb, rank, pinv flag."""
    header = ["sigma2", "ris", *ZETA, "peb", "reb", "fim_rank", "pseudo_inverse_used"]
    return _write_csv(Path(path), header, (
        [_f(r["sigma2"]), r["ris"], *(_f(v) for v in r["pose"]), _f(r["peb"]), _f(r["reb"]),
         r["fim_rank"], int(r["pseudo_inverse_used"])]
        for r in rows
    ))


PLOT_SCRIPT = '''\
"""Error CDFs and bound-vs-sigma2 charts from the exported CSVs.

Run from the export directory: python plot_results.py (needs matplotlib).
"""
import csv
import glob
import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


fig, axes = plt.subplots(1, 2, figsize=(11, 4))
for ax, metric, unit in zip(axes, ("position", "rotation"), ("m", "rad")):
    for path in sorted(glob.glob(f"cdf_{metric}_*.csv")):
        rows = read(path)
        _, _, ris, sigma2 = path[:-4].split("_", 3)
        ax.step([float(r["error"]) for r in rows], [float(r["cdf"]) for r in rows],
                where="post", label=f"RIS {ris}, s2={sigma2}")
    ax.set_xscale("log")
    ax.set_xlabel(f"{metric} error ({unit})")
    ax.set_ylabel("CDF")
    ax.axhline(0.9, color="grey", lw=0.5)
    ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("error_cdf.png", dpi=150)

rows = read("bounds.csv")
acc = defaultdict(list)
for r in rows:
    acc[(r["ris"], float(r["sigma2"]))].append((float(r["peb"]), float(r["reb"])))
fig, axes = plt.subplots(1, 2, figsize=(11, 4))
for ax, k, name in zip(axes, (0, 1), ("PEB (m)", "REB (rad)")):
    for ris in sorted({key[0] for key in acc}):
        s2 = sorted(s for r, s in acc if r == ris)
        vals = []
        for s in s2:
            finite = [v[k] for v in acc[(ris, s)] if math.isfinite(v[k])]
            vals.append(sum(finite) / len(finite) if finite else float("nan"))
        ax.loglog(s2, vals, marker="o", label=f"RIS {ris}")
    ax.set_xlabel("sigma2")
    ax.set_ylabel(f"mean {name}")
    ax.legend()
fig.tight_layout()
fig.savefig("bounds.png", dpi=150)
'''
