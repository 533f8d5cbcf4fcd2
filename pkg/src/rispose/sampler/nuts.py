"""No-U-Turn transition with multinomial trajectory sampling.

Euclidean metric with a diagonal inverse mass. Trajectories double until the
generalized no-U-turn criterion fails (including the extra checks across
merged subtrees), the maximum depth is reached, or the energy error exceeds
``max_energy_error`` (a divergence). Subtree proposals are drawn
multinomially; the top level uses biased progressive sampling.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

LogpGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]

MAX_ENERGY_ERROR = 1000.0


def leapfrog(position, momentum, step_size: float, grad_fn, inv_mass=None):
    """One half-kick / drift / half-kick step for ``H = -log p(q) + p^T M^-1 p / 2``.

    ``grad_fn(q)`` returns the gradient of the log density. A non-finite
    gradient propagates into the returned momentum; callers treat that as a
    divergence.
    """
    q = np.asarray(position, dtype=float)
    p = np.asarray(momentum, dtype=float)
    inv_mass = np.ones_like(q) if inv_mass is None else inv_mass
    p_half = p + 0.5 * step_size * grad_fn(q)
    q_new = q + step_size * inv_mass * p_half
    p_new = p_half + 0.5 * step_size * grad_fn(q_new)
    return q_new, p_new


class NutsDraw(NamedTuple):
    position: np.ndarray
    accept_stat: float
    depth: int
    diverged: bool
    n_leapfrog: int
    logp: float
    grad: np.ndarray


class _State:
    __slots__ = ("q", "p", "grad", "logp", "p_sharp")

    def __init__(self, q, p, grad, logp, p_sharp):
        self.q, self.p, self.grad, self.logp, self.p_sharp = q, p, grad, logp, p_sharp


class _Tree:
    __slots__ = ("inner", "outer", "rho", "proposal", "log_w", "stop")

    def __init__(self, inner, outer, rho, proposal, log_w, stop):
        self.inner = inner  # end adjacent to where the build started
        self.outer = outer  # far end in the build direction
        self.rho = rho
        self.proposal = proposal
        self.log_w = log_w
        self.stop = stop


def _no_uturn(p_sharp_a, p_sharp_b, rho) -> bool:
    return float(p_sharp_a @ rho) > 0.0 and float(p_sharp_b @ rho) > 0.0


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    m = max(a, b)
    return m + math.log(math.exp(a - m) + math.exp(b - m))


class _Builder:
    """Recursive tree construction for one transition."""

    def __init__(self, logp_grad_fn, inv_mass, h0, rng, max_energy):
        self.f = logp_grad_fn
        self.inv_mass = inv_mass
        self.h0 = h0
        self.rng = rng
        self.max_energy = max_energy
        self.n_leapfrog = 0
        self.sum_accept = 0.0
        self.diverged = False

    def leaf(self, s: _State, eps: float) -> _Tree:
        p_half = s.p + (0.5 * eps) * s.grad
        q = s.q + eps * (self.inv_mass * p_half)
        logp, grad = self.f(q)
        p = p_half + (0.5 * eps) * grad
        p_sharp = self.inv_mass * p
        h = -logp + 0.5 * float(p @ p_sharp)
        self.n_leapfrog += 1
        delta = h - self.h0 if math.isfinite(h) else math.inf
        if delta > self.max_energy or math.isnan(delta):
            self.diverged = True
            return _Tree(None, None, None, None, -math.inf, True)
        self.sum_accept += math.exp(-delta) if delta > 0 else 1.0
        new = _State(q, p, grad, logp, p_sharp)
        return _Tree(new, new, p, new, -delta, False)

    def build(self, s: _State, eps: float, depth: int) -> _Tree:
        if depth == 0:
            return self.leaf(s, eps)
        t1 = self.build(s, eps, depth - 1)
        if t1.stop:
            return t1
        t2 = self.build(t1.outer, eps, depth - 1)
        if t2.stop:
            return t2
        log_w = _logaddexp(t1.log_w, t2.log_w)
        proposal = t1.proposal
        if math.log(self.rng.random()) < t2.log_w - log_w:
            proposal = t2.proposal
        rho = t1.rho + t2.rho
        ok = (
            _no_uturn(t1.inner.p_sharp, t2.outer.p_sharp, rho)
            and _no_uturn(t1.inner.p_sharp, t2.inner.p_sharp, t1.rho + t2.inner.p)
            and _no_uturn(t1.outer.p_sharp, t2.outer.p_sharp, t2.rho + t1.outer.p)
        )
        return _Tree(t1.inner, t2.outer, rho, proposal, log_w, not ok)


def nuts_draw(
    current,
    step_size: float,
    logp_grad_fn: LogpGrad,
    rng: np.random.Generator,
    max_depth: int = 10,
    inv_mass: np.ndarray | None = None,
    logp: float | None = None,
    grad: np.ndarray | None = None,
    max_energy_error: float = MAX_ENERGY_ERROR,
) -> NutsDraw:
    """One NUTS transition from ``current``.

    ``logp``/``grad`` at ``current`` may be passed in to skip a re-evaluation.
    ``accept_stat`` is the mean Metropolis acceptance over every new leapfrog
    state, the quantity driving step-size adaptation.
    """
    q0 = np.asarray(current, dtype=float)
    if logp is None or grad is None:
        logp, grad = logp_grad_fn(q0)
    if not np.all(np.isfinite(q0)) or not math.isfinite(logp):
        raise ValueError("NUTS needs a finite starting state with finite log density")
    inv_mass = np.ones_like(q0) if inv_mass is None else inv_mass
    p0 = rng.standard_normal(q0.size) / np.sqrt(inv_mass)
    p_sharp0 = inv_mass * p0
    h0 = -logp + 0.5 * float(p0 @ p_sharp0)
    start = _State(q0, p0, grad, logp, p_sharp0)

    builder = _Builder(logp_grad_fn, inv_mass, h0, rng, max_energy_error)
    minus = plus = start
    rho = p0.copy()
    proposal = start
    log_w = 0.0
    depth = 0
    while depth < max_depth:
        forward = rng.random() < 0.5
        sub = builder.build(plus if forward else minus, step_size if forward else -step_size, depth)
        depth += 1
        if sub.stop:
            break
        # biased progressive sampling favours the newer subtree
        if math.log(rng.random()) < sub.log_w - log_w:
            proposal = sub.proposal
        log_w = _logaddexp(log_w, sub.log_w)
        if forward:
            bck_rho, fwd_rho = rho, sub.rho
            bck_in, bck_out, fwd_in, fwd_out = plus, minus, sub.inner, sub.outer
            plus = sub.outer
        else:
            bck_rho, fwd_rho = sub.rho, rho
            bck_in, bck_out, fwd_in, fwd_out = sub.inner, sub.outer, minus, plus
            minus = sub.outer
        # bck_out/fwd_out are the trajectory extremes, *_in the junction states
        rho = bck_rho + fwd_rho
        ok = (
            _no_uturn(bck_out.p_sharp, fwd_out.p_sharp, rho)
            and _no_uturn(bck_out.p_sharp, fwd_in.p_sharp, bck_rho + fwd_in.p)
            and _no_uturn(bck_in.p_sharp, fwd_out.p_sharp, fwd_rho + bck_in.p)
        )
        if not ok:
            break

    n = builder.n_leapfrog
    accept = builder.sum_accept / n if n else 0.0
    return NutsDraw(proposal.q, accept, depth, builder.diverged, n, proposal.logp, proposal.grad)
