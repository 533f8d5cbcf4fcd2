"""From-scratch NUTS with dual-averaging warm-up and convergence diagnostics."""

from .adapt import DualAveraging, adapt_step_size
from .diagnostics import ess_bulk, rhat, split_rhat
from .nuts import leapfrog, nuts_draw
from .run import (
    ChainFailure,
    GaussianTarget,
    NutsConfig,
    PoseEstimate,
    SampleSet,
    run_chains,
    summarize,
)

__all__ = [
    "ChainFailure",
    "DualAveraging",
    "GaussianTarget",
    "NutsConfig",
    "PoseEstimate",
    "SampleSet",
    "adapt_step_size",
    "ess_bulk",
    "leapfrog",
    "nuts_draw",
    "rhat",
    "run_chains",
    "split_rhat",
    "summarize",
]
