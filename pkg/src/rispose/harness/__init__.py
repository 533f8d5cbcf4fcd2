"""Monte-Carlo campaigns, exports and the command line."""

from .campaign import (
    HarnessError,
    ResultTable,
    TrialResult,
    empirical_cdf,
    nearest_rank,
    pose_grid,
    random_pose,
    run_campaign,
    run_trial,
)
from .config import CampaignConfig, ConfigError, config_from_dict, load_config
from .export import export

__all__ = [
    "CampaignConfig",
    "ConfigError",
    "HarnessError",
    "ResultTable",
    "TrialResult",
    "config_from_dict",
    "empirical_cdf",
    "export",
    "load_config",
    "nearest_rank",
    "pose_grid",
    "random_pose",
    "run_campaign",
    "run_trial",
]
