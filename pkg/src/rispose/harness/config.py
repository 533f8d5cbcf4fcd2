"""Campaign configuration: dataclass plus a TOML loader with schema checks.

Schema (every key optional; missing keys take the defaults below)::

    [scenario]
    room_L = 15.0            # side length (m)
    room_H = 5.0             # height (m)
    f_c = 28e9               # carrier (Hz)
    f_sc = 120e3             # subcarrier spacing (Hz)
    tau0 = 0.0               # clock offset (s)
    bs_position = [0.0, 0.0, 5.0]
    bs_rotation = [0.0, 0.0, 0.0]
    ris_position = [7.5, 15.0, 4.0]
    ris_rotation = [0.0, 0.0, 0.0]
    # b_BR = 1e-4            # BS-RIS gain; free-space over d_BR when omitted

    [campaign]
    sigma2 = [1e-3, 1e-5]    # channel-estimation error variances
    ris_modes = ["on", "off"]
    n_trials = 200           # per (sigma2, ris) cell
    n_obs = 50
    sigma_sp2 = 1e-3
    root_seed = 0
    output_dir = "results"
    workers = 1              # overridden by RISPOSE_WORKERS

    [nuts]
    n_chains = 4
    tune = 1500
    draws = 2500
    target_accept = 0.9
    max_tree_depth = 10
    adapt_mass = false
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from ..channel import Pose, Scenario
from ..sampler import NutsConfig

WORKERS_ENV = "RISPOSE_WORKERS"
RIS_MODES = ("on", "off")

_SCENARIO_KEYS = {
    "room_L", "room_H", "f_c", "f_sc", "tau0", "b_BR",
    "bs_position", "bs_rotation", "ris_position", "ris_rotation",
}
_CAMPAIGN_KEYS = {
    "sigma2", "ris_modes", "n_trials", "n_obs", "sigma_sp2", "root_seed", "output_dir", "workers",
}
_NUTS_KEYS = {"n_chains", "tune", "draws", "target_accept", "max_tree_depth", "adapt_mass"}


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass(frozen=True)
class CampaignConfig:
    scenario: Scenario = field(default_factory=Scenario)
    sigma2_list: tuple[float, ...] = (1e-3, 1e-5)
    ris_modes: tuple[str, ...] = RIS_MODES
    n_trials: int = 200
    n_obs: int = 50
    sigma_sp2: float = 1e-3
    nuts: NutsConfig = field(default_factory=NutsConfig)
    root_seed: int = 0
    output_dir: Path = Path("results")
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sigma2_list", tuple(float(s) for s in self.sigma2_list))
        object.__setattr__(self, "ris_modes", tuple(self.ris_modes))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if not self.sigma2_list or not all(s > 0 for s in self.sigma2_list):
            raise ConfigError("sigma2 must be a non-empty list of positive values")
        if not self.ris_modes or not set(self.ris_modes) <= set(RIS_MODES):
            raise ConfigError(f"ris_modes must be a non-empty subset of {RIS_MODES}")
        if len(set(self.ris_modes)) != len(self.ris_modes):
            raise ConfigError("ris_modes has duplicates")
        if self.n_trials < 1 or self.n_obs < 2:
            raise ConfigError("need n_trials >= 1 and n_obs >= 2")
        if not self.sigma_sp2 > 0:
            raise ConfigError("sigma_sp2 must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def replace(self, **kw) -> "CampaignConfig":
        return dataclasses.replace(self, **kw)

    @property
    def effective_workers(self) -> int:
        raw = os.environ.get(WORKERS_ENV)
        if raw is None or raw == "":
            return self.workers
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be >= 1")
        return n


def _section(doc: dict, name: str, allowed: set[str]) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return sec


def _vec3(sec: dict, key: str, default) -> list[float]:
    v = sec.get(key, default)
    if not (isinstance(v, list) and len(v) == 3 and all(isinstance(x, (int, float)) for x in v)):
        raise ConfigError(f"{key} must be a list of three numbers")
    return [float(x) for x in v]


def config_from_dict(doc: dict) -> CampaignConfig:
    unknown = set(doc) - {"scenario", "campaign", "nuts"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    s = _section(doc, "scenario", _SCENARIO_KEYS)
    c = _section(doc, "campaign", _CAMPAIGN_KEYS)
    n = _section(doc, "nuts", _NUTS_KEYS)
    try:
        scenario = Scenario(
            bs_pose=Pose(_vec3(s, "bs_position", [0.0, 0.0, 5.0]), _vec3(s, "bs_rotation", [0.0] * 3)),
            ris_pose=Pose(_vec3(s, "ris_position", [7.5, 15.0, 4.0]), _vec3(s, "ris_rotation", [0.0] * 3)),
            room_L=float(s.get("room_L", 15.0)),
            room_H=float(s.get("room_H", 5.0)),
            f_c=float(s.get("f_c", 28e9)),
            f_sc=float(s.get("f_sc", 120e3)),
            tau0=float(s.get("tau0", 0.0)),
            b_BR=None if s.get("b_BR") is None else float(s["b_BR"]),
        )
        nuts = NutsConfig(**n)
        sigma2 = c.get("sigma2", [1e-3, 1e-5])
        if isinstance(sigma2, (int, float)):
            sigma2 = [sigma2]
        return CampaignConfig(
            scenario=scenario,
            sigma2_list=tuple(sigma2),
            ris_modes=tuple(c.get("ris_modes", RIS_MODES)),
            n_trials=int(c.get("n_trials", 200)),
            n_obs=int(c.get("n_obs", 50)),
            sigma_sp2=float(c.get("sigma_sp2", 1e-3)),
            nuts=nuts,
            root_seed=int(c.get("root_seed", 0)),
            output_dir=Path(c.get("output_dir", "results")),
            workers=int(c.get("workers", 1)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> CampaignConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc)
