"""Multi-chain NUTS runs, the resulting draw set and the pose summary."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from ..channel import Pose
from .adapt import DiagonalMass, DualAveraging, find_initial_step_size, mass_windows
from .diagnostics import ess_bulk, rhat
from .nuts import nuts_draw


class Target(Protocol):
    dim: int

    def logp_grad(self, u: np.ndarray) -> tuple[float, np.ndarray]: ...

    def constrain(self, draws: np.ndarray) -> np.ndarray: ...

    def initial_point(self, rng: np.random.Generator) -> np.ndarray: ...


class ChainFailure(RuntimeError):
    def __init__(self, chain: int, reason: str):
        super().__init__(f"chain {chain}: {reason}")
        self.chain = chain
        self.reason = reason


@dataclass(frozen=True)
class NutsConfig:
    n_chains: int = 4
    tune: int = 1500
    draws: int = 2500
    target_accept: float = 0.9
    max_tree_depth: int = 10
    seed: int = 0
    adapt_mass: bool = False
    workers: int = 1

    def __post_init__(self):
        if min(self.n_chains, self.draws, self.max_tree_depth, self.workers) < 1 or self.tune < 0:
            raise ValueError(f"invalid NUTS counts: {self}")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")

    @classmethod
    def fast(cls, seed: int = 0, **kw) -> "NutsConfig":
        """Desk-scale preset: one chain, 500 warm-up and 500 kept draws."""
        kw.setdefault("adapt_mass", True)
        return cls(n_chains=1, tune=500, draws=500, seed=seed, **kw)


@dataclass
class SampleSet:
    draws: np.ndarray  # (chains, draws, dim), constrained space
    accept_stats: np.ndarray  # (chains, draws)
    tree_depth: np.ndarray  # (chains, draws)
    diverging: np.ndarray  # (chains, draws) bool
    n_leapfrog: np.ndarray  # (chains, draws)
    step_size: np.ndarray  # (chains,) adapted step size per chain
    rhat: np.ndarray  # (dim,)
    ess: np.ndarray  # (dim,)
    names: list[str] | None = None

    @property
    def divergences(self) -> int:
        return int(self.diverging.sum())

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    def to_csv(self, directory) -> list[Path]:
        """Write one CSV per chain: coordinates, accept_stat, depth, diverging."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        names = self.names or [f"q{i}" for i in range(self.draws.shape[2])]
        paths = []
        for c in range(self.n_chains):
            path = directory / f"chain_{c}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow([*names, "accept_stat", "tree_depth", "diverging"])
                for k in range(self.draws.shape[1]):
                    w.writerow([
                        *(repr(float(v)) for v in self.draws[c, k]),
                        repr(float(self.accept_stats[c, k])),
                        int(self.tree_depth[c, k]),
                        int(self.diverging[c, k]),
                    ])
            paths.append(path)
        return paths


def _initial_state(target: Target, rng: np.random.Generator, chain: int):
    for _ in range(100):
        q = target.initial_point(rng)
        logp, grad = target.logp_grad(q)
        if math.isfinite(logp) and np.all(np.isfinite(grad)):
            return q, logp, grad
    raise ChainFailure(chain, "no finite initial point in 100 attempts")


def _run_chain(target: Target, cfg: NutsConfig, seed: np.random.SeedSequence, chain: int) -> dict:
    rng = np.random.default_rng(seed)
    f = target.logp_grad
    q, logp, grad = _initial_state(target, rng, chain)
    inv_mass = np.ones(target.dim)
    eps = find_initial_step_size(q, logp, grad, f, rng, inv_mass)
    da = DualAveraging(eps, cfg.target_accept)
    windows = mass_windows(cfg.tune) if cfg.adapt_mass else []
    window_ends = {end for _, end in windows}
    mass_start = windows[0][0] if windows else cfg.tune
    mass_end = windows[-1][1] if windows else cfg.tune
    mass = DiagonalMass(target.dim)

    n = cfg.draws
    kept = np.empty((n, target.dim))
    accept = np.empty(n)
    depth = np.empty(n, dtype=np.int64)
    diverging = np.zeros(n, dtype=bool)
    n_leapfrog = np.empty(n, dtype=np.int64)
    if cfg.tune == 0:
        da = None

    for it in range(cfg.tune + n):
        d = nuts_draw(q, eps, f, rng, cfg.max_tree_depth, inv_mass, logp, grad)
        q, logp, grad = d.position, d.logp, d.grad
        if it < cfg.tune:
            eps = da.update(d.accept_stat)
            if mass_start <= it < mass_end:
                mass.add(q)
            if it + 1 in window_ends:
                inv_mass = mass.inverse_mass()
                mass.reset()
                eps = find_initial_step_size(q, logp, grad, f, rng, inv_mass, eps)
                da.restart(eps)
            if it + 1 == cfg.tune:
                eps = da.final_step_size
            continue
        k = it - cfg.tune
        kept[k] = q
        accept[k] = d.accept_stat
        depth[k] = d.depth
        diverging[k] = d.diverged
        n_leapfrog[k] = d.n_leapfrog

    return {
        "draws": kept,
        "accept": accept,
        "depth": depth,
        "diverging": diverging,
        "n_leapfrog": n_leapfrog,
        "step_size": eps,
    }


def _chain_job(args):
    return _run_chain(*args)


def run_chains(target: Target, cfg: NutsConfig) -> SampleSet:
    """Run ``cfg.n_chains`` independent chains and pool their kept draws.

    Each chain gets its own stream spawned from ``cfg.seed``; the result does
    not depend on ``cfg.workers``.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    jobs = [(target, cfg, seeds[c], c) for c in range(cfg.n_chains)]
    if cfg.workers > 1 and cfg.n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.n_chains)) as pool:
            results = list(pool.map(_chain_job, jobs))
    else:
        results = [_chain_job(j) for j in jobs]

    for c, r in enumerate(results):
        if r["diverging"].all():
            raise ChainFailure(c, "every post-warm-up transition diverged")

    raw = np.stack([r["draws"] for r in results])
    draws = target.constrain(raw)
    diag_ok = draws.shape[1] >= 4
    return SampleSet(
        draws=draws,
        accept_stats=np.stack([r["accept"] for r in results]),
        tree_depth=np.stack([r["depth"] for r in results]),
        diverging=np.stack([r["diverging"] for r in results]),
        n_leapfrog=np.stack([r["n_leapfrog"] for r in results]),
        step_size=np.array([r["step_size"] for r in results]),
        rhat=rhat(draws) if diag_ok else np.full(target.dim, np.nan),
        ess=ess_bulk(draws) if diag_ok else np.full(target.dim, np.nan),
        names=getattr(target, "names", None),
    )


@dataclass(frozen=True)
class PoseEstimate:
    pose_mean: Pose
    position_error: float | None = None
    rotation_error: float | None = None


def summarize(samples: SampleSet, truth: Pose | None = None, estimator: str = "mean") -> PoseEstimate:
    """Point estimate over all chains' kept draws, plus errors against ``truth``.

    Rotation error is the Euclidean norm of the three angle differences; no
    wrapping is applied since the prior support is a sub-interval of [0, pi/2].
    """
    pooled = samples.draws[:, :, :6].reshape(-1, 6)
    if pooled.shape[0] == 0:
        raise ValueError("empty sample set")
    if estimator == "mean":
        zeta = pooled.mean(axis=0)
    elif estimator == "median":
        zeta = np.median(pooled, axis=0)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    est = Pose.from_vector(zeta)
    if truth is None:
        return PoseEstimate(est)
    return PoseEstimate(
        est,
        float(np.linalg.norm(est.position - truth.position)),
        float(np.linalg.norm(est.rotation - truth.rotation)),
    )


class GaussianTarget:
    """Multivariate normal test target on R^d (identity constraint)."""

    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=float)
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self.prec = np.linalg.inv(self.cov)
        self.dim = self.mean.size
        _, logdet = np.linalg.slogdet(self.cov)
        self._const = -0.5 * (self.dim * math.log(2 * math.pi) + logdet)

    def logp_grad(self, u):
        r = u - self.mean
        g = -(self.prec @ r)
        return self._const + 0.5 * float(r @ g), g

    def constrain(self, draws):
        return np.asarray(draws)

    def initial_point(self, rng):
        return self.mean + rng.uniform(-2.0, 2.0, self.dim)
