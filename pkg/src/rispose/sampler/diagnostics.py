"""Split-R-hat and bulk effective sample size (rank-normalized, Vehtari et al. 2021).

All functions take draws shaped ``(n_chains, n_draws)`` or
``(n_chains, n_draws, dim)`` and return one value per dimension.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata


def _as_3d(draws) -> np.ndarray:
    x = np.asarray(draws, dtype=float)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ValueError("draws must be (chains, draws) or (chains, draws, dim)")
    if x.shape[1] < 4:
        raise ValueError("need at least 4 draws per chain")
    return x


def split_chains(x: np.ndarray) -> np.ndarray:
    """Split each chain in half; an odd middle draw is dropped."""
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half :]], axis=0)


def rank_normalize(x: np.ndarray) -> np.ndarray:
    """Normal scores of the pooled ranks, per dimension."""
    m, n = x.shape[:2]
    flat = x.reshape(m * n, -1)
    ranks = np.apply_along_axis(rankdata, 0, flat)
    z = ndtri((ranks - 0.375) / (m * n + 0.25))
    return z.reshape(x.shape)


def _rhat_basic(x: np.ndarray) -> np.ndarray:
    m, n = x.shape[:2]
    chain_var = x.var(axis=1, ddof=1)
    within = chain_var.mean(axis=0)
    between = n * x.mean(axis=1).var(axis=0, ddof=1)
    var_plus = (n - 1) / n * within + between / n
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(var_plus / within)
    # constant draws: identical chains count as converged
    return np.where(within > 0, rhat, np.where(between > 0, np.inf, 1.0))


def split_rhat(draws) -> np.ndarray:
    """Classic (Gelman-Rubin) R-hat on split chains."""
    return _rhat_basic(split_chains(_as_3d(draws)))


def rhat(draws) -> np.ndarray:
    """Rank-normalized split R-hat: max of the bulk and folded (tail) versions."""
    x = split_chains(_as_3d(draws))
    bulk = _rhat_basic(rank_normalize(x))
    folded = np.abs(x - np.median(x.reshape(-1, x.shape[2]), axis=0))
    tail = _rhat_basic(rank_normalize(folded))
    return np.maximum(bulk, tail)


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance along axis 1 via FFT; x is (m, n)."""
    n = x.shape[1]
    centered = x - x.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size, axis=1)
    return np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n] / n


def _ess_1d(x: np.ndarray) -> float:
    m, n = x.shape
    acov = _autocov(x)
    mean_var = acov[:, 0].mean() * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return float(m * n)
    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = rho_odd
    # Geyer's initial positive sequence
    t = 1
    while t < n - 2 and rho_even + rho_odd >= 0.0:
        rho_even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        rho[t + 1] = rho_even
        if rho_even + rho_odd >= 0.0:
            rho[t + 2] = rho_odd
        t += 2
    max_t = t
    # ... made monotone
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = rho[t + 2] = 0.5 * (rho[t - 1] + rho[t])
        t += 2
    tau = -1.0 + 2.0 * rho[:max_t].sum() + rho[max_t + 1 : max_t + 2].sum()
    tau = max(tau, 1.0 / np.log10(m * n))
    return float(m * n / tau)


def ess_bulk(draws) -> np.ndarray:
    x = rank_normalize(split_chains(_as_3d(draws)))
    return np.array([_ess_1d(x[:, :, k]) for k in range(x.shape[2])])


def ess_basic(draws) -> np.ndarray:
    """ESS of the mean on the raw (split) draws."""
    x = split_chains(_as_3d(draws))
    return np.array([_ess_1d(x[:, :, k]) for k in range(x.shape[2])])
