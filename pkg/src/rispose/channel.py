"""Geometric channel parameters of the BS-MS and BS-RIS-MS links.

The observable vector has a fixed canonical order (12 entries with the RIS,
the 6 BS-MS entries without it)::

    psi_bm_1, psi_bm_2, psi_rm_1, psi_rm_2,
    varsigma_bm_1, varsigma_bm_2, varsigma_rm_1, varsigma_rm_2,
    omega_bm, omega_brm, b_bm, b_brm

Spatial frequencies use the positive convention ``pi sin(theta') cos(phi')`` and
``pi cos(theta')``; gains are the real magnitudes ``sqrt(c / (4 pi f_c d))``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import (
    GeometryError,
    direction_and_distance,
    local_spherical_angles,
    rotation_matrix,
)

SPEED_OF_LIGHT = 299_792_458.0

ETA_NAMES = (
    "psi_bm_1",
    "psi_bm_2",
    "psi_rm_1",
    "psi_rm_2",
    "varsigma_bm_1",
    "varsigma_bm_2",
    "varsigma_rm_1",
    "varsigma_rm_2",
    "omega_bm",
    "omega_brm",
    "b_bm",
    "b_brm",
)
# positions of the BS-MS entries inside the 12-vector
BM_INDEX = (0, 1, 4, 5, 8, 10)
ETA_NAMES_BM = tuple(ETA_NAMES[i] for i in BM_INDEX)

MAX_TENSOR_DIM = 8


@dataclass(frozen=True)
class Pose:
    """Position (m) and ZYX Euler rotation (rad) of a node."""

    position: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        rot = np.asarray(self.rotation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(rot))):
            raise GeometryError("pose must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)

    @classmethod
    def from_vector(cls, zeta) -> "Pose":
        zeta = np.asarray(zeta, dtype=float)
        return cls(zeta[:3], zeta[3:6])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.rotation])

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.as_vector(), other.as_vector()))

    def __hash__(self):
        return hash(tuple(self.as_vector()))


def path_gain(d: float, f_c: float) -> float:
    """Free-space amplitude ``sqrt(c / (4 pi f_c d))``; the path phase is not modelled."""
    if not d > 0 or not f_c > 0:
        raise GeometryError(f"path_gain needs d > 0 and f_c > 0, got d={d}, f_c={f_c}")
    return float(np.sqrt(SPEED_OF_LIGHT / (f_c * 4.0 * np.pi * d)))


def delay_phase(path_length: float, tau0: float, f_sc: float) -> float:
    """Unwrapped subcarrier phase progression ``-2 pi (d / c + tau0) f_sc``."""
    return float(-2.0 * np.pi * (path_length / SPEED_OF_LIGHT + tau0) * f_sc)


@dataclass(frozen=True)
class Scenario:
    bs_pose: Pose = field(default_factory=lambda: Pose([0.0, 0.0, 5.0]))
    ris_pose: Pose = field(default_factory=lambda: Pose([7.5, 15.0, 4.0]))
    room_L: float = 15.0
    room_H: float = 5.0
    f_c: float = 28e9
    f_sc: float = 120e3
    tau0: float = 0.0
    ris_enabled: bool = True
    b_BR: float | None = None  # None -> free-space gain over d_BR

    def __post_init__(self):
        if not (self.room_L > 0 and self.room_H > 0):
            raise ValueError("room dimensions must be positive")
        if not (self.f_c > 0 and self.f_sc > 0):
            raise ValueError("f_c and f_sc must be positive")
        hi = np.array([self.room_L, self.room_L, self.room_H])
        for name, pose in (("bs_pose", self.bs_pose), ("ris_pose", self.ris_pose)):
            if np.any(pose.position < 0) or np.any(pose.position > hi):
                raise ValueError(f"{name} {pose.position.tolist()} outside the room")
        if self.d_BR <= 0:
            raise ValueError("BS and RIS coincide")
        if self.b_BR is None:
            object.__setattr__(self, "b_BR", path_gain(self.d_BR, self.f_c))
        elif not self.b_BR > 0:
            raise ValueError("b_BR must be positive")

    @property
    def d_BR(self) -> float:
        return float(np.linalg.norm(self.ris_pose.position - self.bs_pose.position))

    @property
    def n_eta(self) -> int:
        return 12 if self.ris_enabled else 6

    @property
    def eta_names(self) -> tuple[str, ...]:
        return ETA_NAMES if self.ris_enabled else ETA_NAMES_BM

    @property
    def upper_bounds(self) -> np.ndarray:
        return np.array([self.room_L, self.room_L, self.room_H])

    def with_ris(self, enabled: bool) -> "Scenario":
        return dataclasses.replace(self, ris_enabled=bool(enabled))


@dataclass(frozen=True)
class ChannelParams:
    values: np.ndarray
    ris_enabled: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        expected = 12 if self.ris_enabled else 6
        if v.size != expected:
            raise ValueError(f"expected {expected} channel parameters, got {v.size}")
        object.__setattr__(self, "values", v)

    @property
    def names(self) -> tuple[str, ...]:
        return ETA_NAMES if self.ris_enabled else ETA_NAMES_BM

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))

    def project_bm(self) -> "ChannelParams":
        """The 6-entry BS-MS sub-vector."""
        if not self.ris_enabled:
            return self
        return ChannelParams(self.values[list(BM_INDEX)], ris_enabled=False)


@dataclass(frozen=True)
class ObservationSet:
    samples: np.ndarray  # (N, n_eta)
    sigma_sp2: float
    ce_sigma2: float = float("nan")

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if s.shape[0] < 1 or s.shape[1] not in (6, 12):
            raise ValueError(f"bad observation matrix shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("observations must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def ris_enabled(self) -> bool:
        return self.samples.shape[1] == 12


def _spatial_frequencies(direction: np.ndarray, R: np.ndarray) -> tuple[float, float]:
    theta, phi = local_spherical_angles(direction, R)
    return (
        float(np.pi * np.sin(theta) * np.cos(phi)),
        float(np.pi * np.cos(theta)),
    )


def arrival_spatial_frequencies(ms: Pose, anchor_pos) -> tuple[float, float]:
    """(psi_1, psi_2) of the anchor as seen from the MS array."""
    k, _ = direction_and_distance(ms.position, anchor_pos)
    return _spatial_frequencies(k, rotation_matrix(ms.rotation))


def departure_spatial_frequencies(anchor: Pose, ms_pos) -> tuple[float, float]:
    """(varsigma_1, varsigma_2) of the MS as seen from the anchor array."""
    k, _ = direction_and_distance(anchor.position, ms_pos)
    return _spatial_frequencies(k, rotation_matrix(anchor.rotation))


def channel_params(ms: Pose, sc: Scenario) -> ChannelParams:
    psi_bm = arrival_spatial_frequencies(ms, sc.bs_pose.position)
    vs_bm = departure_spatial_frequencies(sc.bs_pose, ms.position)
    _, d_bm = direction_and_distance(sc.bs_pose.position, ms.position)
    omega_bm = delay_phase(d_bm, sc.tau0, sc.f_sc)
    b_bm = path_gain(d_bm, sc.f_c)
    if not sc.ris_enabled:
        return ChannelParams([*psi_bm, *vs_bm, omega_bm, b_bm], ris_enabled=False)

    psi_rm = arrival_spatial_frequencies(ms, sc.ris_pose.position)
    vs_rm = departure_spatial_frequencies(sc.ris_pose, ms.position)
    _, d_rm = direction_and_distance(sc.ris_pose.position, ms.position)
    omega_brm = delay_phase(sc.d_BR + d_rm, sc.tau0, sc.f_sc)
    b_brm = sc.b_BR * path_gain(d_rm, sc.f_c)
    return ChannelParams(
        [*psi_bm, *psi_rm, *vs_bm, *vs_rm, omega_bm, omega_brm, b_bm, b_brm],
        ris_enabled=True,
    )


def perturb_params(eta: ChannelParams, sigma2: float, rng: np.random.Generator) -> ChannelParams:
    """Channel-estimation output: ``eta + w`` with ``w ~ N(0, sigma2 I)``."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    noise = np.sqrt(sigma2) * rng.standard_normal(eta.values.size)
    return ChannelParams(eta.values + noise, eta.ris_enabled)


def draw_observations(
    eta_hat: ChannelParams,
    sigma_sp2: float,
    n: int = 50,
    rng: np.random.Generator | None = None,
    ce_sigma2: float = float("nan"),
) -> ObservationSet:
    if n < 1:
        raise ValueError("need at least one observation")
    if not sigma_sp2 > 0:
        raise ValueError("sigma_sp2 must be positive")
    rng = np.random.default_rng() if rng is None else rng
    dim = eta_hat.values.size
    samples = eta_hat.values + np.sqrt(sigma_sp2) * rng.standard_normal((n, dim))
    return ObservationSet(samples, float(sigma_sp2), float(ce_sigma2))


class TensorDims(NamedTuple):
    n_sc: int = 2  # subcarriers
    ms: tuple[int, int] = (2, 2)
    bs: tuple[int, int] = (2, 2)
    ris: tuple[int, int] = (2, 2)
    n_sym: int = 1


def build_channel_tensor(
    ms: Pose,
    sc: Scenario,
    dims: TensorDims = TensorDims(),
    ris_profile: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Materialize small LOS channel tensors for consistency checks.

    Returns ``H_BM`` with axes ``(n, u1, u2, v1, v2)`` and ``H_BRM`` with axes
    ``(n, t, u1, u2, v1, v2)``. ``ris_profile`` holds unit-magnitude RIS
    coefficients with shape ``(NR1, NR2, n_sym)``; all-ones by default.
    """
    sizes = [dims.n_sc, *dims.ms, *dims.bs, *dims.ris, dims.n_sym]
    if any(s < 1 for s in sizes):
        raise ValueError(f"tensor dimensions must be >= 1, got {dims}")
    if any(s > MAX_TENSOR_DIM for s in sizes):
        raise ValueError(f"tensor dimensions above {MAX_TENSOR_DIM} are not supported: {dims}")
    if ris_profile is None:
        ris_profile = np.ones((*dims.ris, dims.n_sym), dtype=complex)
    ris_profile = np.asarray(ris_profile, dtype=complex)
    if ris_profile.shape != (*dims.ris, dims.n_sym):
        raise ValueError(f"ris_profile shape {ris_profile.shape} != {(*dims.ris, dims.n_sym)}")
    if not np.allclose(np.abs(ris_profile), 1.0, atol=1e-12):
        raise ValueError("ris_profile entries must have unit magnitude")

    eta = channel_params(ms, sc.with_ris(True))
    n = np.arange(dims.n_sc)
    u1, u2 = np.arange(dims.ms[0]), np.arange(dims.ms[1])
    v1, v2 = np.arange(dims.bs[0]), np.arange(dims.bs[1])

    def steering(w: float, p1: float, p2: float, q1: float, q2: float) -> np.ndarray:
        return np.exp(
            1j
            * (
                w * n[:, None, None, None, None]
                + p1 * u1[None, :, None, None, None]
                + p2 * u2[None, None, :, None, None]
                + q1 * v1[None, None, None, :, None]
                + q2 * v2[None, None, None, None, :]
            )
        )

    h_bm = eta["b_bm"] * steering(
        eta["omega_bm"], eta["psi_bm_1"], eta["psi_bm_2"], eta["varsigma_bm_1"], eta["varsigma_bm_2"]
    )

    # BS -> RIS leg: departure at the BS, arrival at the RIS
    vs_br = departure_spatial_frequencies(sc.bs_pose, sc.ris_pose.position)
    psi_br = arrival_spatial_frequencies(sc.ris_pose, sc.bs_pose.position)
    vartheta1 = psi_br[0] + eta["varsigma_rm_1"]
    vartheta2 = psi_br[1] + eta["varsigma_rm_2"]
    k1, k2 = np.arange(dims.ris[0]), np.arange(dims.ris[1])
    ris_phase = np.exp(1j * (k1[:, None] * vartheta1 + k2[None, :] * vartheta2))
    ris_sum = np.einsum("ab,abt->t", ris_phase, ris_profile)

    base = eta["b_brm"] * steering(eta["omega_brm"], eta["psi_rm_1"], eta["psi_rm_2"], *vs_br)
    h_brm = base[:, None] * ris_sum[None, :, None, None, None, None]
    return h_bm, h_brm
