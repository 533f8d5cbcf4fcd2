"""Oracle suites behind ``rispose validate``.

Each check returns a :class:`CheckResult`; none of them raise on a failed
comparison.
"""

from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass

import numpy as np

from ..channel import Scenario, build_channel_tensor, channel_params
from ..crlb import finite_difference_jacobian, jacobian_eta_wrt_zeta, jacobian_relative_error
from ..sampler import GaussianTarget, NutsConfig, run_chains
from .campaign import random_pose


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def check_jacobian(n_poses: int = 100, seed: int = 0, tol: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    sc = Scenario()
    worst = 0.0
    for _ in range(n_poses):
        pose = random_pose(sc, rng)
        for on in (True, False):
            s = sc.with_ris(on)
            worst = max(worst, jacobian_relative_error(jacobian_eta_wrt_zeta(pose, s),
                                                       finite_difference_jacobian(pose, s)))
    return CheckResult("jacobian-fd", worst <= tol, f"worst relative error {worst:.2e} (tol {tol:g})")


def tensor_phase_error(pose, sc: Scenario) -> tuple[float, float]:
    """Largest phase and magnitude deviation of the 2x2x2x2x2 BS-MS tensor.

    The reference phase is built entry by entry from the linear index form
    ``omega*n + psi1*u1 + psi2*u2 + vs1*v1 + vs2*v2``.
    """
    h_bm, _ = build_channel_tensor(pose, sc)
    eta = channel_params(pose, sc.with_ris(True))
    b = eta["b_bm"]
    phase_err = mag_err = 0.0
    for n, u1, u2, v1, v2 in itertools.product(range(2), repeat=5):
        lin = (eta["omega_bm"] * n + eta["psi_bm_1"] * u1 + eta["psi_bm_2"] * u2
               + eta["varsigma_bm_1"] * v1 + eta["varsigma_bm_2"] * v2)
        h = h_bm[n, u1, u2, v1, v2]
        phase_err = max(phase_err, abs(cmath.phase(h / cmath.exp(1j * lin))))
        mag_err = max(mag_err, abs(abs(h) - b) / b)
    return phase_err, mag_err


def check_tensor_phases(n_poses: int = 20, seed: int = 1, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    sc = Scenario()
    errs = [tensor_phase_error(random_pose(sc, rng), sc) for _ in range(n_poses)]
    ph = max(e[0] for e in errs)
    mag = max(e[1] for e in errs)
    return CheckResult("tensor-phases", ph <= tol and mag <= tol,
                       f"max phase error {ph:.2e} rad, max relative magnitude spread {mag:.2e}")


def check_nuts_gaussian(seed: int = 0) -> CheckResult:
    target = GaussianTarget(np.zeros(6), np.eye(6))
    s = run_chains(target, NutsConfig(n_chains=4, tune=500, draws=1000, seed=seed))
    pooled = s.draws.reshape(-1, 6)
    mean_err = float(np.max(np.abs(pooled.mean(axis=0))))
    var_err = float(np.max(np.abs(pooled.var(axis=0, ddof=1) - 1.0)))
    rh = float(np.max(s.rhat))
    ok = mean_err <= 0.05 and var_err <= 0.10 and rh <= 1.01
    return CheckResult("nuts-gaussian", ok,
                       f"max |mean| {mean_err:.3f}, max |var-1| {var_err:.3f}, max rhat {rh:.4f}")


def run_all() -> list[CheckResult]:
    return [check_jacobian(), check_tensor_phases(), check_nuts_gaussian()]
