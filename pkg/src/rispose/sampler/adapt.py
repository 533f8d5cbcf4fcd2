"""Warm-up adaptation: dual-averaging step size and windowed diagonal mass."""

from __future__ import annotations

import math

import numpy as np


class DualAveraging:
    """Nesterov dual averaging of ``log(step_size)`` toward a target acceptance.

    Constants follow Hoffman & Gelman (2014): ``gamma=0.05``, ``t0=10``,
    ``kappa=0.75`` and the shrinkage point ``mu = log(10 * step_size)``.
    """

    def __init__(self, step_size: float, target_accept: float = 0.8,
                 gamma: float = 0.05, t0: float = 10.0, kappa: float = 0.75):
        if not 0.0 < target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        self.target = target_accept
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.restart(step_size)

    def restart(self, step_size: float) -> None:
        self.mu = math.log(10.0 * step_size)
        self.step_size = step_size
        self.log_avg = 0.0
        self.h_bar = 0.0
        self.t = 0

    def update(self, accept_stat: float) -> float:
        """Feed one acceptance statistic; returns the step size for the next iteration."""
        accept_stat = min(1.0, accept_stat) if math.isfinite(accept_stat) else 0.0
        self.t += 1
        w = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat)
        log_step = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        x = self.t ** -self.kappa
        self.log_avg = x * log_step + (1.0 - x) * self.log_avg
        self.step_size = math.exp(log_step)
        return self.step_size

    @property
    def final_step_size(self) -> float:
        return math.exp(self.log_avg) if self.t else self.step_size


def adapt_step_size(history, target_accept: float, initial_step_size: float = 1.0) -> np.ndarray:
    """Step-size schedule produced by feeding ``history`` through dual averaging.

    Entry ``i`` is the step size used after observing ``history[:i+1]``; the
    last entry is replaced by the averaged (frozen) value.
    """
    da = DualAveraging(initial_step_size, target_accept)
    out = np.array([da.update(a) for a in history], dtype=float)
    if out.size:
        out[-1] = da.final_step_size
    return out


def find_initial_step_size(q, logp, grad, logp_grad_fn, rng, inv_mass, step_size: float = 1.0) -> float:
    """Double or halve the step until one leapfrog step's acceptance crosses 0.8."""
    p = rng.standard_normal(q.size) / np.sqrt(inv_mass)
    h0 = -logp + 0.5 * p @ (inv_mass * p)

    def log_accept(eps):
        p_half = p + 0.5 * eps * grad
        q_new = q + eps * inv_mass * p_half
        lp, g = logp_grad_fn(q_new)
        p_new = p_half + 0.5 * eps * g
        h = -lp + 0.5 * p_new @ (inv_mass * p_new)
        return h0 - h if np.isfinite(h) else -np.inf

    threshold = math.log(0.8)
    direction = 1.0 if log_accept(step_size) > threshold else -1.0
    for _ in range(60):
        step_size *= 2.0**direction
        la = log_accept(step_size)
        if direction > 0 and not la > threshold:
            break
        if direction < 0 and not la < threshold:
            break
    return step_size


def mass_windows(tune: int, init_buffer: int = 75, term_buffer: int = 50,
                 base_window: int = 25) -> list[tuple[int, int]]:
    """Warm-up windows ``[start, end)`` whose draws estimate the diagonal mass.

    Stan's layout: a fast initial buffer, doubling slow windows, a final buffer
    for step size only.
    """
    if tune < 20:
        return []
    if init_buffer + base_window + term_buffer > tune:
        init_buffer = int(0.15 * tune)
        term_buffer = int(0.1 * tune)
        base_window = tune - init_buffer - term_buffer
    windows = []
    start, window = init_buffer, base_window
    last = tune - term_buffer
    while start < last:
        end = start + window
        # a window that cannot be doubled again absorbs the remainder
        if end + 2 * window > last:
            end = last
        windows.append((start, end))
        start, window = end, 2 * window
    return windows


class DiagonalMass:
    """Running variance of warm-up draws inside the current window."""

    def __init__(self, dim: int):
        self.dim = dim
        self.reset()

    def reset(self) -> None:
        self.n = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros(self.dim)

    def add(self, q: np.ndarray) -> None:
        self.n += 1
        delta = q - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (q - self.mean)

    def inverse_mass(self) -> np.ndarray:
        """Regularized variance estimate, shrunk toward 1e-3 as in Stan."""
        var = self.m2 / max(self.n - 1, 1)
        return (self.n / (self.n + 5.0)) * var + 1e-3 * (5.0 / (self.n + 5.0))
