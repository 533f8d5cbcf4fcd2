"""Bayesian network over the MS pose and per-parameter noise variances.

Latent variables: MS position (uniform over the room), MS Euler angles
(uniform over ``(0, eps)``) and one variance per observed channel parameter
(``InverseGamma(0.001, 0.001)``). Each observed row is Gaussian around the
noiseless channel parameters of the candidate pose with diagonal covariance
``diag(sigma_eta2)``.

The sampler works on an unconstrained vector ``u``: ``logit`` of each bounded
pose coordinate rescaled to (0, 1), followed by ``log`` of each variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .channel import BM_INDEX, SPEED_OF_LIGHT, ObservationSet, Pose, Scenario, channel_params
from .crlb import SingularGeometryError, jacobian_eta_wrt_zeta
from .geometry import GeometryError, rotation_matrix

DEFAULT_EPS = np.pi / 4
IG_SHAPE = 1e-3
IG_SCALE = 1e-3
_LOG_2PI = math.log(2.0 * math.pi)


class SupportError(ValueError):
    """State on or outside the boundary of the prior support."""


@dataclass(frozen=True)
class LatentState:
    pose: Pose
    sigma_eta2: np.ndarray


@dataclass(frozen=True)
class LogDensity:
    value: float
    gradient: np.ndarray
    degenerate: bool = False


def prior_bounds(sc: Scenario, eps: float = DEFAULT_EPS) -> tuple[np.ndarray, np.ndarray]:
    lo = np.zeros(6)
    hi = np.array([sc.room_L, sc.room_L, sc.room_H, eps, eps, eps])
    return lo, hi


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def to_unconstrained(s: LatentState, sc: Scenario, eps: float = DEFAULT_EPS) -> np.ndarray:
    lo, hi = prior_bounds(sc, eps)
    z = (s.pose.as_vector() - lo) / (hi - lo)
    var = np.asarray(s.sigma_eta2, dtype=float)
    if np.any(z <= 0) or np.any(z >= 1):
        raise SupportError(f"pose {s.pose.as_vector().tolist()} not strictly inside the prior box")
    if np.any(var <= 0):
        raise SupportError("variances must be positive")
    return np.concatenate([np.log(z) - np.log1p(-z), np.log(var)])


def from_unconstrained(u, sc: Scenario, eps: float = DEFAULT_EPS) -> LatentState:
    u = np.asarray(u, dtype=float)
    lo, hi = prior_bounds(sc, eps)
    zeta = lo + (hi - lo) * _sigmoid(u[:6])
    return LatentState(Pose.from_vector(zeta), np.exp(u[6:]))


def constrain_draws(draws: np.ndarray, sc: Scenario, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Vectorised :func:`from_unconstrained` over a ``(..., dim)`` array."""
    lo, hi = prior_bounds(sc, eps)
    out = np.empty_like(draws)
    out[..., :6] = lo + (hi - lo) * _sigmoid(draws[..., :6])
    out[..., 6:] = np.exp(draws[..., 6:])
    return out


def _check_obs(obs: ObservationSet, sc: Scenario) -> None:
    if obs.samples.shape[1] != sc.n_eta:
        raise ValueError(
            f"observations have {obs.samples.shape[1]} columns but the scenario expects {sc.n_eta}"
        )


def log_prior(u, sc: Scenario, eps: float = DEFAULT_EPS) -> LogDensity:
    """Uniform pose prior and inverse-gamma variances, with both log-Jacobians."""
    u = np.asarray(u, dtype=float)
    a, b = IG_SHAPE, IG_SCALE
    up, v = u[:6], u[6:]
    # the uniform density 1/(hi-lo) cancels the scale factor of the logit Jacobian
    log_jac = -np.abs(up) - 2.0 * np.log1p(np.exp(-np.abs(up)))
    value = float(np.sum(log_jac))
    value += float(np.sum(a * np.log(b) - gammaln(a) - a * v - b * np.exp(-v)))
    grad = np.concatenate([1.0 - 2.0 * _sigmoid(up), -a + b * np.exp(-v)])
    return LogDensity(value, grad)


def _gaussian_terms(mu, ybar, ss, n, v):
    """Log-likelihood, d/dmu and d/dv from per-column sufficient statistics."""
    inv = np.exp(-v)
    resid = ybar - mu
    q = ss + n * resid**2
    value = float(np.sum(-0.5 * n * (_LOG_2PI + v) - 0.5 * q * inv))
    return value, n * resid * inv, -0.5 * n + 0.5 * q * inv


def log_likelihood(u, obs: ObservationSet, sc: Scenario, eps: float = DEFAULT_EPS) -> LogDensity:
    """Gaussian observation model, evaluated through :func:`channel_params`.

    The pose gradient uses the analytic Jacobian from :mod:`rispose.crlb`;
    inside the zenith guard band of a link it falls back to the Cartesian
    form used by the compiled kernel (the two agree elsewhere).
    """
    _check_obs(obs, sc)
    u = np.asarray(u, dtype=float)
    state = from_unconstrained(u, sc, eps)
    try:
        mu = channel_params(state.pose, sc).values
    except GeometryError:
        return LogDensity(-np.inf, np.zeros_like(u), degenerate=True)
    try:
        J = jacobian_eta_wrt_zeta(state.pose, sc)
    except SingularGeometryError:
        J = _cartesian_model(state.pose, sc)[1]
    ybar = obs.samples.mean(axis=0)
    ss = ((obs.samples - ybar) ** 2).sum(axis=0)
    value, g_mu, g_v = _gaussian_terms(mu, ybar, ss, obs.n, u[6:])
    lo, hi = prior_bounds(sc, eps)
    s = _sigmoid(u[:6])
    g_pose = (J.T @ g_mu) * (hi - lo) * s * (1.0 - s)
    return LogDensity(value, np.concatenate([g_pose, g_v]))


def log_posterior(u, obs: ObservationSet, sc: Scenario, eps: float = DEFAULT_EPS) -> LogDensity:
    prior = log_prior(u, sc, eps)
    like = log_likelihood(u, obs, sc, eps)
    if like.degenerate:
        return like
    return LogDensity(prior.value + like.value, prior.gradient + like.gradient)


# --- compiled hot path -------------------------------------------------------


@numba.njit(cache=True)
def _link_terms(chi, d, R, sign, mu, J, row1, row2, with_rotation, dR0, dR1, dR2):
    """Spatial frequencies of one link and their pose partials.

    ``chi`` points along the propagation direction seen by the frame ``R``; the
    frequencies are ``pi * (R^T chi/d)_x`` and ``pi * (R^T chi/d)_z``.
    """
    kx = (R[0, 0] * chi[0] + R[1, 0] * chi[1] + R[2, 0] * chi[2]) / d
    kz = (R[0, 2] * chi[0] + R[1, 2] * chi[1] + R[2, 2] * chi[2]) / d
    mu[row1] = math.pi * kx
    mu[row2] = math.pi * kz
    # d(chi/d)/d(ms position) = sign * (I/d - chi chi^T / d^3)
    for j in range(3):
        ax = R[j, 0] / d - kx * chi[j] / (d * d)
        az = R[j, 2] / d - kz * chi[j] / (d * d)
        J[row1, j] = sign * math.pi * ax
        J[row2, j] = sign * math.pi * az
    if with_rotation:
        for j in range(3):
            dR = dR0 if j == 0 else (dR1 if j == 1 else dR2)
            J[row1, 3 + j] = math.pi * (dR[0, 0] * chi[0] + dR[1, 0] * chi[1] + dR[2, 0] * chi[2]) / d
            J[row2, 3 + j] = math.pi * (dR[0, 2] * chi[0] + dR[1, 2] * chi[1] + dR[2, 2] * chi[2]) / d


@numba.njit(cache=True)
def _rot(a, b, g):
    ca, sa = math.cos(a), math.sin(a)
    cb, sb = math.cos(b), math.sin(b)
    cg, sg = math.cos(g), math.sin(g)
    rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cg, -sg], [0.0, sg, cg]])
    drz = np.array([[-sa, -ca, 0.0], [ca, -sa, 0.0], [0.0, 0.0, 0.0]])
    dry = np.array([[-sb, 0.0, cb], [0.0, 0.0, 0.0], [-cb, 0.0, -sb]])
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sg, -cg], [0.0, cg, -sg]])
    R = rz @ ry @ rx
    return R, drz @ ry @ rx, rz @ dry @ rx, rz @ ry @ drx


@numba.njit(cache=True)
def _model_kernel(zeta, bs_pos, R_B, ris_pos, R_R, f_c, f_sc, tau0, b_BR, d_BR, ris):
    """Noiseless channel parameters (full 12-order) and their Jacobian.

    Returns ``ok=False`` when the MS coincides with an anchor.
    """
    mu = np.zeros(12)
    J = np.zeros((12, 6))
    R_M, dRa, dRb, dRg = _rot(zeta[3], zeta[4], zeta[5])
    pos = zeta[:3]
    chi_bm = pos - bs_pos
    d_bm = math.sqrt(chi_bm[0] ** 2 + chi_bm[1] ** 2 + chi_bm[2] ** 2)
    if d_bm == 0.0:
        return mu, J, False
    # arrival at the MS looks back along -chi
    _link_terms(-chi_bm, d_bm, R_M, -1.0, mu, J, 0, 1, True, dRa, dRb, dRg)
    _link_terms(chi_bm, d_bm, R_B, 1.0, mu, J, 4, 5, False, dRa, dRb, dRg)
    w = -2.0 * math.pi * f_sc / SPEED_OF_LIGHT
    mu[8] = -2.0 * math.pi * (d_bm / SPEED_OF_LIGHT + tau0) * f_sc
    b_bm = math.sqrt(SPEED_OF_LIGHT / (f_c * 4.0 * math.pi * d_bm))
    mu[10] = b_bm
    for j in range(3):
        J[8, j] = w * chi_bm[j] / d_bm
        J[10, j] = -b_bm * chi_bm[j] / (2.0 * d_bm * d_bm)
    if ris:
        chi_rm = pos - ris_pos
        d_rm = math.sqrt(chi_rm[0] ** 2 + chi_rm[1] ** 2 + chi_rm[2] ** 2)
        if d_rm == 0.0:
            return mu, J, False
        _link_terms(-chi_rm, d_rm, R_M, -1.0, mu, J, 2, 3, True, dRa, dRb, dRg)
        _link_terms(chi_rm, d_rm, R_R, 1.0, mu, J, 6, 7, False, dRa, dRb, dRg)
        mu[9] = -2.0 * math.pi * ((d_BR + d_rm) / SPEED_OF_LIGHT + tau0) * f_sc
        b_brm = b_BR * math.sqrt(SPEED_OF_LIGHT / (f_c * 4.0 * math.pi * d_rm))
        mu[11] = b_brm
        for j in range(3):
            J[9, j] = w * chi_rm[j] / d_rm
            J[11, j] = -b_brm * chi_rm[j] / (2.0 * d_rm * d_rm)
    return mu, J, True


@numba.njit(cache=True)
def _logp_grad_kernel(
    u, lo, hi, idx, ybar, ss, n, freq_sign, ig_a, ig_b, ig_const,
    bs_pos, R_B, ris_pos, R_R, f_c, f_sc, tau0, b_BR, d_BR, ris,
):
    dim = u.shape[0]
    m = dim - 6
    grad = np.zeros(dim)
    zeta = np.empty(6)
    dz = np.empty(6)
    value = 0.0
    for i in range(6):
        ui = u[i]
        s = 0.5 * (1.0 + math.tanh(0.5 * ui))
        zeta[i] = lo[i] + (hi[i] - lo[i]) * s
        dz[i] = (hi[i] - lo[i]) * s * (1.0 - s)
        value += -abs(ui) - 2.0 * math.log1p(math.exp(-abs(ui)))
        grad[i] = 1.0 - 2.0 * s
    mu_full, J_full, ok = _model_kernel(zeta, bs_pos, R_B, ris_pos, R_R, f_c, f_sc, tau0, b_BR, d_BR, ris)
    if not ok:
        return -np.inf, np.zeros(dim)
    g_zeta = np.zeros(6)
    for k in range(m):
        r = idx[k]
        v = u[6 + k]
        inv = math.exp(-v)
        # prior on the variance, in log space (Jacobian included)
        value += ig_const - ig_a * v - ig_b * inv
        grad[6 + k] = -ig_a + ig_b * inv
        sgn = freq_sign if r < 8 else 1.0
        resid = ybar[k] - sgn * mu_full[r]
        q = ss[k] + n * resid * resid
        value += -0.5 * n * (_LOG_2PI + v) - 0.5 * q * inv
        grad[6 + k] += -0.5 * n + 0.5 * q * inv
        g_mu = n * resid * inv * sgn
        for j in range(6):
            g_zeta[j] += J_full[r, j] * g_mu
    for i in range(6):
        grad[i] += g_zeta[i] * dz[i]
    return value, grad


def _anchor_args(sc: Scenario):
    return (
        sc.bs_pose.position,
        rotation_matrix(sc.bs_pose.rotation),
        sc.ris_pose.position,
        rotation_matrix(sc.ris_pose.rotation),
        float(sc.f_c),
        float(sc.f_sc),
        float(sc.tau0),
        float(sc.b_BR),
        float(sc.d_BR),
        bool(sc.ris_enabled),
    )


def _cartesian_model(pose: Pose, sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Channel parameters and Jacobian via the compiled Cartesian form."""
    mu, J, ok = _model_kernel(pose.as_vector(), *_anchor_args(sc))
    if not ok:
        raise GeometryError("MS coincides with an anchor")
    rows = list(range(12)) if sc.ris_enabled else list(BM_INDEX)
    return mu[rows], J[rows]


class LocalizationModel:
    """Posterior bundle consumed by the sampler.

    ``logp_grad(u)`` is the compiled equivalent of :func:`log_posterior`.
    ``freq_sign=-1`` flips the sign of every spatial-frequency mean.
    """

    def __init__(
        self,
        sc: Scenario,
        obs: ObservationSet,
        eps: float = DEFAULT_EPS,
        freq_sign: float = 1.0,
        n_starts: int = 8,
    ):
        _check_obs(obs, sc)
        self.n_starts = int(n_starts)
        self.sc = sc
        self.obs = obs
        self.eps = eps
        self.dim = 6 + sc.n_eta
        self.lo, self.hi = prior_bounds(sc, eps)
        self._idx = np.array(range(12) if sc.ris_enabled else BM_INDEX, dtype=np.int64)
        self._ybar = obs.samples.mean(axis=0)
        self._ss = ((obs.samples - self._ybar) ** 2).sum(axis=0)
        self._n = float(obs.n)
        self._freq_sign = float(freq_sign)
        ig_const = IG_SHAPE * math.log(IG_SCALE) - float(gammaln(IG_SHAPE))
        self._args = (
            self.lo, self.hi, self._idx, self._ybar, self._ss, self._n, self._freq_sign,
            IG_SHAPE, IG_SCALE, ig_const, *_anchor_args(sc),
        )

    def logp_grad(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        return _logp_grad_kernel(np.asarray(u, dtype=float), *self._args)

    def constrain(self, draws: np.ndarray) -> np.ndarray:
        return constrain_draws(draws, self.sc, self.eps)

    def initial_point(self, rng: np.random.Generator) -> np.ndarray:
        """Chain start: best of ``n_starts`` short L-BFGS ascents from Uniform(-2, 2).

        With free per-entry variances the posterior has metastable modes where
        some entries are explained away as noise; a single random start lands
        in one often enough to matter. ``n_starts=0`` returns the raw draw.
        """
        if self.n_starts == 0:
            return rng.uniform(-2.0, 2.0, self.dim)
        best_u, best_val = None, -np.inf
        for _ in range(self.n_starts):
            u0 = rng.uniform(-2.0, 2.0, self.dim)
            u, val = self._ascend(u0)
            if val > best_val:
                best_u, best_val = u, val
        return best_u

    def _ascend(self, u0: np.ndarray) -> tuple[np.ndarray, float]:
        def neg(u):
            v, g = self.logp_grad(u)
            if not np.isfinite(v):
                return 1e300, np.zeros_like(u)
            return -v, -g

        # keep the start inside a region the sampler's logit scale handles well
        res = minimize(neg, u0, jac=True, method="L-BFGS-B", bounds=[(-12.0, 12.0)] * self.dim,
                       options={"maxiter": 300})
        return res.x, -float(res.fun)

    @property
    def names(self) -> list[str]:
        return ["x", "y", "z", "alpha", "beta", "gamma"] + [f"var_{n}" for n in self.sc.eta_names]
