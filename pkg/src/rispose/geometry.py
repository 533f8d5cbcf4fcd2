"""Coordinate conversions, ZYX Euler rotations and global-to-local angle transforms.

Angles are radians throughout. Points and directions are plain ``(3,)`` float
arrays; Euler angles are ``(alpha, beta, gamma)`` = (bearing, downtilt, slant)
and the composite rotation is ``R = Rz(alpha) @ Ry(beta) @ Rx(gamma)``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# arccos arguments within this distance of +-1 are clamped
CLAMP_TOL = 1e-9
UNIT_TOL = 1e-9


class GeometryError(ValueError):
    """Degenerate or out-of-domain geometric input."""


class SphericalAngles(NamedTuple):
    theta: float  # zenith, [0, pi]
    phi: float  # azimuth, [-pi, pi]


def _finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise GeometryError(f"non-finite input: {a!r}")


def spherical_to_cartesian(s: SphericalAngles, rho: float = 1.0) -> np.ndarray:
    theta, phi = s
    _finite(theta, phi, rho)
    if rho <= 0:
        raise GeometryError(f"radius must be positive, got {rho}")
    st = np.sin(theta)
    return np.array([rho * st * np.cos(phi), rho * st * np.sin(phi), rho * np.cos(theta)])


def _clamped_arccos(z: float) -> float:
    if abs(z) > 1.0 + CLAMP_TOL:
        raise GeometryError(f"arccos argument {z} outside [-1, 1]")
    return float(np.arccos(min(1.0, max(-1.0, z))))


def cartesian_to_spherical(p) -> SphericalAngles:
    """Zenith/azimuth of a unit vector; ``phi = 0`` on the z-axis."""
    p = np.asarray(p, dtype=float)
    _finite(p)
    if abs(np.linalg.norm(p) - 1.0) > UNIT_TOL:
        raise GeometryError(f"expected a unit vector, got norm {np.linalg.norm(p)}")
    return SphericalAngles(_clamped_arccos(p[2]), float(np.arctan2(p[1], p[0])))


def rot_z(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(beta: float) -> np.ndarray:
    c, s = np.cos(beta), np.sin(beta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(gamma: float) -> np.ndarray:
    c, s = np.cos(gamma), np.sin(gamma)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def drot_z(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def drot_y(beta: float) -> np.ndarray:
    c, s = np.cos(beta), np.sin(beta)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def drot_x(gamma: float) -> np.ndarray:
    c, s = np.cos(gamma), np.sin(gamma)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def rotation_matrix(r) -> np.ndarray:
    alpha, beta, gamma = np.asarray(r, dtype=float)
    _finite(alpha, beta, gamma)
    return rot_z(alpha) @ rot_y(beta) @ rot_x(gamma)


def rotation_matrix_partials(r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(dR/dalpha, dR/dbeta, dR/dgamma)`` of :func:`rotation_matrix`."""
    alpha, beta, gamma = np.asarray(r, dtype=float)
    _finite(alpha, beta, gamma)
    rz, ry, rx = rot_z(alpha), rot_y(beta), rot_x(gamma)
    return (
        drot_z(alpha) @ ry @ rx,
        rz @ drot_y(beta) @ rx,
        rz @ ry @ drot_x(gamma),
    )


def local_spherical_angles(direction, R: np.ndarray) -> SphericalAngles:
    """Angles of a global unit ``direction`` seen in the frame rotated by ``R``.

    The local vector is ``R.T @ direction``; theta' is its zenith and phi' its
    azimuth. phi' is 0 when the direction lies on the local z-axis.
    """
    d = np.asarray(direction, dtype=float)
    _finite(d, R)
    if abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
        raise GeometryError(f"expected a unit direction, got norm {np.linalg.norm(d)}")
    v = R.T @ d
    return SphericalAngles(_clamped_arccos(v[2]), float(np.arctan2(v[1], v[0])))


def direction_and_distance(start, end) -> tuple[np.ndarray, float]:
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    _finite(start, end)
    delta = end - start
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        raise GeometryError(f"coincident points {start.tolist()}")
    return delta / dist, dist
