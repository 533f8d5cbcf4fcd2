"""Analytic Jacobian of the channel parameters w.r.t. the MS pose, Fisher
information, CRLB and the position/rotation error bounds.

The Jacobian is assembled link by link through the local angles
``theta'``/``phi'``: for a link with local unit vector ``K`` the angles are
``arccos(K_z)`` and ``atan2(K_y, K_x)``, and ``dK`` is propagated from the MS
position (via the projection matrix ``A = I/d - chi chi^T / d^3``) and from
the MS rotation (via the rotation-matrix partials).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .channel import BM_INDEX, SPEED_OF_LIGHT, Pose, Scenario, channel_params
from .geometry import GeometryError, rotation_matrix, rotation_matrix_partials

SIN_THETA_GUARD = 1e-8
COND_LIMIT = 1e12
NULL_BLOCK_TOL = 1e-6
ZETA_NAMES = ("x", "y", "z", "alpha", "beta", "gamma")


class SingularGeometryError(GeometryError):
    """A link's local zenith angle sits at 0 or pi, where phi' is undefined."""

    def __init__(self, link: str, sin_theta: float):
        super().__init__(f"link {link}: |sin(theta')| = {sin_theta:.3g} inside the zenith guard band")
        self.link = link


@dataclass(frozen=True)
class AuxBundle:
    chi_BM: np.ndarray
    chi_RM: np.ndarray
    d_BM: float
    d_RM: float
    K_MB: np.ndarray  # MS frame, towards the BS
    K_MR: np.ndarray  # MS frame, towards the RIS
    K_BM: np.ndarray  # BS frame, towards the MS
    K_RM: np.ndarray  # RIS frame, towards the MS
    A_BM: np.ndarray
    A_RM: np.ndarray


def _projection(chi: np.ndarray, d: float) -> np.ndarray:
    # derivative of chi/d w.r.t. the MS position
    return np.eye(3) / d - np.outer(chi, chi) / d**3


def aux_terms(ms: Pose, sc: Scenario) -> AuxBundle:
    chi_bm = ms.position - sc.bs_pose.position
    chi_rm = ms.position - sc.ris_pose.position
    d_bm = float(np.linalg.norm(chi_bm))
    d_rm = float(np.linalg.norm(chi_rm))
    if d_bm == 0.0 or d_rm == 0.0:
        raise GeometryError("MS coincides with an anchor")
    r_m = rotation_matrix(ms.rotation)
    return AuxBundle(
        chi_BM=chi_bm,
        chi_RM=chi_rm,
        d_BM=d_bm,
        d_RM=d_rm,
        K_MB=r_m.T @ (-chi_bm / d_bm),
        K_MR=r_m.T @ (-chi_rm / d_rm),
        K_BM=rotation_matrix(sc.bs_pose.rotation).T @ (chi_bm / d_bm),
        K_RM=rotation_matrix(sc.ris_pose.rotation).T @ (chi_rm / d_rm),
        A_BM=_projection(chi_bm, d_bm),
        A_RM=_projection(chi_rm, d_rm),
    )


def _angle_partials(K: np.ndarray, dK: np.ndarray, link: str) -> tuple[np.ndarray, np.ndarray]:
    """Partials of (theta', phi') given ``dK`` with shape (3, n_params)."""
    rho2 = K[0] ** 2 + K[1] ** 2
    sin_t = np.sqrt(rho2)
    if sin_t < SIN_THETA_GUARD:
        raise SingularGeometryError(link, sin_t)
    d_theta = -dK[2] / sin_t
    d_phi = (K[0] * dK[1] - K[1] * dK[0]) / rho2
    return d_theta, d_phi


def _freq_rows(K: np.ndarray, dK: np.ndarray, link: str) -> np.ndarray:
    """Rows d(pi sin th cos ph)/dp and d(pi cos th)/dp."""
    d_theta, d_phi = _angle_partials(K, dK, link)
    theta = np.arccos(np.clip(K[2], -1.0, 1.0))
    phi = np.arctan2(K[1], K[0])
    d_f1_d_theta = np.pi * np.cos(theta) * np.cos(phi)
    d_f1_d_phi = -np.pi * np.sin(theta) * np.sin(phi)
    d_f2_d_theta = -np.pi * np.sin(theta)
    return np.vstack([d_f1_d_theta * d_theta + d_f1_d_phi * d_phi, d_f2_d_theta * d_theta])


def jacobian_eta_wrt_zeta(ms: Pose, sc: Scenario) -> np.ndarray:
    """d eta / d zeta, rows in canonical eta order, columns (x, y, z, alpha, beta, gamma)."""
    aux = aux_terms(ms, sc)
    dR = rotation_matrix_partials(ms.rotation)
    r_m = rotation_matrix(ms.rotation)

    def arrival(K, chi, d, A, link):
        dK = np.empty((3, 6))
        dK[:, :3] = -r_m.T @ A
        for i in range(3):
            dK[:, 3 + i] = dR[i].T @ (-chi / d)
        return _freq_rows(K, dK, link)

    def departure(K, R_anchor, A, link):
        dK = np.zeros((3, 6))
        dK[:, :3] = R_anchor.T @ A
        return _freq_rows(K, dK, link)

    J = np.zeros((12, 6))
    J[0:2] = arrival(aux.K_MB, aux.chi_BM, aux.d_BM, aux.A_BM, "MB")
    J[4:6] = departure(aux.K_BM, rotation_matrix(sc.bs_pose.rotation), aux.A_BM, "BM")
    omega_scale = -2.0 * np.pi * sc.f_sc / SPEED_OF_LIGHT
    J[8, :3] = omega_scale * aux.chi_BM / aux.d_BM
    b_bm = np.sqrt(SPEED_OF_LIGHT / (sc.f_c * 4.0 * np.pi * aux.d_BM))
    J[10, :3] = -b_bm * aux.chi_BM / (2.0 * aux.d_BM**2)
    if not sc.ris_enabled:
        return J[list(BM_INDEX)]

    J[2:4] = arrival(aux.K_MR, aux.chi_RM, aux.d_RM, aux.A_RM, "MR")
    J[6:8] = departure(aux.K_RM, rotation_matrix(sc.ris_pose.rotation), aux.A_RM, "RM")
    J[9, :3] = omega_scale * aux.chi_RM / aux.d_RM
    b_brm = sc.b_BR * np.sqrt(SPEED_OF_LIGHT / (sc.f_c * 4.0 * np.pi * aux.d_RM))
    J[11, :3] = -b_brm * aux.chi_RM / (2.0 * aux.d_RM**2)
    return J


def finite_difference_jacobian(ms: Pose, sc: Scenario, h: float = 1e-6) -> np.ndarray:
    """Central differences of :func:`channel_params` over the six pose coordinates."""
    if not h > 0:
        raise ValueError("step must be positive")
    zeta = ms.as_vector()
    cols = []
    for i in range(6):
        step = np.zeros(6)
        step[i] = h
        hi = channel_params(Pose.from_vector(zeta + step), sc).values
        lo = channel_params(Pose.from_vector(zeta - step), sc).values
        cols.append((hi - lo) / (2.0 * h))
    return np.column_stack(cols)


def jacobian_relative_error(J: np.ndarray, J_ref: np.ndarray) -> float:
    """Largest entrywise deviation, scaled by the magnitude of its reference row."""
    scale = np.max(np.abs(J_ref), axis=1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.abs(J - J_ref) / scale))


def fisher_information(J: np.ndarray, sigma2: float) -> np.ndarray:
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    return (J.T @ J) / sigma2


@dataclass(frozen=True)
class BoundReport:
    fim: np.ndarray
    crlb: np.ndarray
    peb: float
    reb: float
    fim_rank: int
    pseudo_inverse_used: bool

    def as_row(self) -> dict:
        return {
            "peb": self.peb,
            "reb": self.reb,
            "fim_rank": self.fim_rank,
            "pseudo_inverse_used": self.pseudo_inverse_used,
        }


def bounds(fim: np.ndarray) -> BoundReport:
    """PEB/REB from a 6x6 Fisher matrix.

    Uses the inverse when ``cond(fim) < 1e12`` and the pseudo-inverse otherwise.
    In the singular case a bound whose block overlaps the FIM null space is
    ``inf``; the pseudo-inverse would report zero variance there.
    """
    fim = np.asarray(fim, dtype=float)
    norm = np.linalg.norm(fim)
    if fim.shape != (6, 6):
        raise ValueError(f"expected a 6x6 Fisher matrix, got {fim.shape}")
    if np.max(np.abs(fim - fim.T)) > 1e-10 * max(norm, 1.0):
        raise ValueError("Fisher matrix is not symmetric")
    rank = int(np.linalg.matrix_rank(fim))
    peb_inf = reb_inf = False
    if np.linalg.cond(fim) < COND_LIMIT:
        crlb, pinv = np.linalg.inv(fim), False
    else:
        crlb, pinv = np.linalg.pinv(fim, hermitian=True), True
        # a block reached by the null space is unidentifiable: its bound is unbounded
        eigval, eigvec = np.linalg.eigh(fim)
        null = eigvec[:, eigval <= COND_LIMIT**-1 * max(eigval.max(), 0.0)]
        peb_inf = bool(np.any(np.linalg.norm(null[:3], axis=0) > NULL_BLOCK_TOL))
        reb_inf = bool(np.any(np.linalg.norm(null[3:], axis=0) > NULL_BLOCK_TOL))
    peb = np.inf if peb_inf else float(np.sqrt(max(np.trace(crlb[:3, :3]), 0.0)))
    reb = np.inf if reb_inf else float(np.sqrt(max(np.trace(crlb[3:, 3:]), 0.0)))
    return BoundReport(fim, crlb, peb, reb, rank, pinv)


def bound_report(ms: Pose, sc: Scenario, sigma2: float) -> BoundReport:
    """Bounds at ``ms``. The unit-variance information is inverted once and scaled
    by ``sigma2`` afterwards, so the sqrt(sigma2) law holds to rounding even when
    the pseudo-inverse is in play."""
    unit = bounds(fisher_information(jacobian_eta_wrt_zeta(ms, sc), 1.0))
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    root = math.sqrt(sigma2)
    return dataclasses.replace(unit, fim=unit.fim / sigma2, crlb=unit.crlb * sigma2,
                               peb=unit.peb * root, reb=unit.reb * root)
