"""Monte-Carlo trials over a (sigma2, RIS on/off) grid.

Seeding: the true pose of trial ``k`` comes from ``(root_seed, k)`` alone, so
every cell sees the same targets; the noise and the sampler stream of a trial
come from ``(root_seed, crc32(cell), k)``. Results therefore do not depend on
the worker count or the scheduling order.
"""

from __future__ import annotations

import dataclasses
import math
import tempfile
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..channel import Pose, Scenario, channel_params, draw_observations, perturb_params
from ..crlb import SingularGeometryError, bound_report, jacobian_eta_wrt_zeta
from ..geometry import GeometryError
from ..posterior import LocalizationModel, SupportError
from ..sampler import ChainFailure, PoseEstimate, run_chains, summarize
from .config import CampaignConfig

ANCHOR_EXCLUSION = 0.5
MAX_POSE_ATTEMPTS = 1000
METRICS = ("position", "rotation")
_POSE_STREAM = 0x9E3779B9


class HarnessError(RuntimeError):
    pass


def random_pose(sc: Scenario, rng: np.random.Generator) -> Pose:
    """Uniform pose in the open room box with angles in (0, pi/4).

    Poses within 0.5 m of an anchor or inside a zenith guard band are redrawn.
    """
    hi = np.array([sc.room_L, sc.room_L, sc.room_H])
    geo = sc.with_ris(True)
    for _ in range(MAX_POSE_ATTEMPTS):
        pos = rng.uniform(0.0, 1.0, 3) * hi
        rot = rng.uniform(0.0, math.pi / 4, 3)
        if np.any(pos <= 0.0) or np.any(pos >= hi) or np.any(rot <= 0.0):
            continue
        if min(np.linalg.norm(pos - sc.bs_pose.position),
               np.linalg.norm(pos - sc.ris_pose.position)) < ANCHOR_EXCLUSION:
            continue
        pose = Pose(pos, rot)
        try:
            jacobian_eta_wrt_zeta(pose, geo)
        except SingularGeometryError:
            continue
        return pose
    raise HarnessError(f"no admissible pose after {MAX_POSE_ATTEMPTS} attempts")


def pose_grid(sc: Scenario, n_xy: int = 5, n_z: int = 2, rotation=(math.pi / 8,) * 3) -> list[Pose]:
    """Cell-centred grid over the room, all at one rotation."""
    xs = (np.arange(n_xy) + 0.5) * sc.room_L / n_xy
    zs = (np.arange(n_z) + 0.5) * sc.room_H / n_z
    return [Pose([x, y, z], rotation) for x in xs for y in xs for z in zs]


def cell_key(sigma2: float, ris_on: bool) -> str:
    return f"{sigma2!r}/{'on' if ris_on else 'off'}"


def trial_seed(root_seed: int, sigma2: float, ris_on: bool, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([root_seed, zlib.crc32(cell_key(sigma2, ris_on).encode()), index])


def pose_seed(root_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([root_seed, _POSE_STREAM, index])


@dataclass(frozen=True)
class TrialResult:
    index: int
    true_pose: Pose
    estimate: PoseEstimate | None
    sigma2: float
    ris_on: bool
    rhat_max: float
    divergences: int
    wall_time: float
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    @property
    def position_error(self) -> float:
        return self.estimate.position_error if self.ok else math.nan

    @property
    def rotation_error(self) -> float:
        return self.estimate.rotation_error if self.ok else math.nan

    def error(self, metric: str) -> float:
        return self.position_error if metric == "position" else self.rotation_error


def run_trial(
    sc: Scenario,
    sigma2: float,
    ris_on: bool,
    cfg: CampaignConfig,
    rng: np.random.Generator,
    true_pose: Pose | None = None,
    index: int = 0,
) -> TrialResult:
    """Truth -> perturbed parameters -> observations -> NUTS -> pose summary.

    A structured sampler failure is recorded in the result instead of raised.
    """
    t0 = time.perf_counter()
    sc = sc.with_ris(ris_on)
    truth = random_pose(sc, rng) if true_pose is None else true_pose
    eta_hat = perturb_params(channel_params(truth, sc), sigma2, rng)
    obs = draw_observations(eta_hat, cfg.sigma_sp2, cfg.n_obs, rng)
    nuts = dataclasses.replace(cfg.nuts, seed=int(rng.integers(2**63)))
    try:
        samples = run_chains(LocalizationModel(sc, obs), nuts)
    except (ChainFailure, SupportError, GeometryError) as exc:
        return TrialResult(index, truth, None, sigma2, ris_on, math.nan, 0,
                           time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")
    est = summarize(samples, truth)
    return TrialResult(
        index, truth, est, sigma2, ris_on,
        float(np.nanmax(samples.rhat)) if np.any(np.isfinite(samples.rhat)) else math.nan,
        samples.divergences, time.perf_counter() - t0,
    )


def nearest_rank(values, q: float = 0.9) -> float:
    """Nearest-rank percentile: the ceil(q*n)-th smallest value."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        return math.nan
    return float(x[max(math.ceil(round(q * x.size, 9)), 1) - 1])


def empirical_cdf(values) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(values, dtype=float))
    return x, np.arange(1, x.size + 1) / x.size


@dataclass
class CellSummary:
    sigma2: float
    ris_on: bool
    metric: str
    cdf_x: np.ndarray
    cdf_p: np.ndarray
    p90: float
    median: float
    n: int
    n_failed: int


@dataclass
class ResultTable:
    trials: list[TrialResult]
    sigma2_list: tuple[float, ...]
    ris_modes: tuple[str, ...]
    bounds: dict = field(default_factory=dict)  # (sigma2, ris_on) -> [(peb, reb)] per trial
    cells: dict = field(default_factory=dict)  # (metric, ris_on, sigma2) -> CellSummary

    def cell_trials(self, sigma2: float, ris_on: bool) -> list[TrialResult]:
        return [t for t in self.trials if t.sigma2 == sigma2 and t.ris_on == ris_on]

    def p90(self, metric: str, ris_on: bool, sigma2: float) -> float:
        return self.cells[(metric, ris_on, sigma2)].p90

    def summarize(self) -> "ResultTable":
        """Fill CDFs and percentiles; failed trials are counted, not ranked."""
        self.cells = {}
        for sigma2 in self.sigma2_list:
            for mode in self.ris_modes:
                on = mode == "on"
                trials = self.cell_trials(sigma2, on)
                good = [t for t in trials if t.ok]
                for metric in METRICS:
                    errs = [t.error(metric) for t in good]
                    x, p = empirical_cdf(errs)
                    self.cells[(metric, on, sigma2)] = CellSummary(
                        sigma2, on, metric, x, p, nearest_rank(errs, 0.9),
                        float(np.median(errs)) if errs else math.nan,
                        len(good), len(trials) - len(good),
                    )
        return self


def _check_writable(directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=directory):
            pass
    except OSError as exc:
        raise HarnessError(f"output directory {directory} is not writable: {exc}") from exc


def _trial_job(args) -> TrialResult:
    sc, sigma2, ris_on, cfg, index = args
    pose = random_pose(sc, np.random.default_rng(pose_seed(cfg.root_seed, index)))
    rng = np.random.default_rng(trial_seed(cfg.root_seed, sigma2, ris_on, index))
    return run_trial(sc, sigma2, ris_on, cfg, rng, true_pose=pose, index=index)


def run_campaign(cfg: CampaignConfig, progress=None) -> ResultTable:
    """Run every (sigma2, ris) cell and return the summarized table.

    ``progress(result)`` is called after each finished trial when given.
    """
    _check_writable(cfg.output_dir)
    jobs = [
        (cfg.scenario, sigma2, mode == "on", cfg, k)
        for sigma2 in cfg.sigma2_list
        for mode in cfg.ris_modes
        for k in range(cfg.n_trials)
    ]
    workers = cfg.effective_workers
    results: list[TrialResult] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for r in pool.map(_trial_job, jobs, chunksize=1):
                results.append(r)
                if progress:
                    progress(r)
    else:
        for job in jobs:
            results.append(_trial_job(job))
            if progress:
                progress(results[-1])

    table = ResultTable(results, cfg.sigma2_list, cfg.ris_modes)
    for sigma2 in cfg.sigma2_list:
        for mode in cfg.ris_modes:
            sc = cfg.scenario.with_ris(mode == "on")
            reps = [bound_report(t.true_pose, sc, sigma2) for t in table.cell_trials(sigma2, mode == "on")]
            table.bounds[(sigma2, mode == "on")] = [(r.peb, r.reb) for r in reps]
    return table.summarize()
