import math

import numpy as np
import pytest
from scipy.integrate import quad

from rispose.channel import Pose, Scenario, channel_params, draw_observations, perturb_params
from rispose.posterior import LocalizationModel, prior_bounds
from rispose.sampler import (
    ChainFailure,
    DualAveraging,
    GaussianTarget,
    NutsConfig,
    SampleSet,
    adapt_step_size,
    ess_bulk,
    leapfrog,
    nuts_draw,
    rhat,
    run_chains,
    split_rhat,
    summarize,
)
from rispose.sampler.adapt import DiagonalMass, find_initial_step_size, mass_windows
from rispose.sampler.diagnostics import ess_basic

from conftest import interior_pose


def std_normal(q):
    return -0.5 * float(q @ q), -q


# --- leapfrog ---------------------------------------------------------------

def test_leapfrog_at_rest():
    q, p = leapfrog(np.array([1.0, 2.0]), np.zeros(2), 0.1, lambda q: np.zeros(2))
    np.testing.assert_array_equal(q, [1.0, 2.0])
    np.testing.assert_array_equal(p, [0.0, 0.0])


def test_leapfrog_energy_error_is_second_order():
    def energy_error(eps):
        q, p = np.array([1.0]), np.array([0.5])
        h0 = 0.5 * q @ q + 0.5 * p @ p
        n = int(round(1.0 / eps))
        for _ in range(n):
            q, p = leapfrog(q, p, eps, lambda x: -x)
        return abs(0.5 * q @ q + 0.5 * p @ p - h0)

    ratio = energy_error(0.02) / energy_error(0.01)
    assert 3.5 < ratio < 4.5


def test_leapfrog_reversible(rng):
    q0, p0 = rng.standard_normal(6), rng.standard_normal(6)
    inv_mass = rng.uniform(0.5, 2.0, 6)
    grad = lambda q: -q**3 - q
    q, p = q0, p0
    for _ in range(50):
        q, p = leapfrog(q, p, 0.05, grad, inv_mass)
    p = -p
    for _ in range(50):
        q, p = leapfrog(q, p, 0.05, grad, inv_mass)
    np.testing.assert_allclose(q, q0, atol=1e-10)
    np.testing.assert_allclose(-p, p0, atol=1e-10)


# --- NUTS transitions ---------------------------------------------------------

def test_nuts_draw_fields(rng):
    d = nuts_draw(np.zeros(3), 0.5, std_normal, rng)
    assert d.position.shape == (3,) and 0.0 <= d.accept_stat <= 1.0
    assert 1 <= d.depth <= 10 and d.n_leapfrog >= 1 and not d.diverged
    with pytest.raises(ValueError):
        nuts_draw(np.array([np.nan]), 0.5, std_normal, rng)


def test_nuts_flags_divergence(rng):
    d = nuts_draw(np.zeros(2), 50.0, lambda q: (-0.5 * float(q @ q) * 1e4, -1e4 * q), rng)
    assert d.diverged


def test_nuts_respects_max_depth(rng):
    d = nuts_draw(np.zeros(2), 1e-4, std_normal, rng, max_depth=3)
    assert d.depth <= 3 and d.n_leapfrog <= 2**3 - 1


def test_standard_normal_recovery():
    s = run_chains(GaussianTarget(np.zeros(6), np.eye(6)), NutsConfig(n_chains=4, tune=500, draws=2500, seed=3))
    pooled = s.draws.reshape(-1, 6)
    assert np.all(np.abs(pooled.mean(axis=0)) < 0.05)
    np.testing.assert_allclose(pooled.var(axis=0), 1.0, rtol=0.10)
    assert np.all(s.rhat <= 1.01)
    # mean within 3 posterior sd / sqrt(ESS)
    assert np.all(np.abs(pooled.mean(axis=0)) <= 3.0 / np.sqrt(s.ess))


def test_badly_scaled_gaussian():
    s = run_chains(GaussianTarget(np.zeros(2), np.diag([1.0, 100.0])),
                   NutsConfig(n_chains=4, tune=1000, draws=2500, seed=4))
    np.testing.assert_allclose(s.draws.reshape(-1, 2).var(axis=0), [1.0, 100.0], rtol=0.10)


def test_ill_conditioned_6d_gaussian(rng):
    a = rng.standard_normal((6, 6))
    q, _ = np.linalg.qr(a)
    cov = q @ np.diag([0.01, 0.1, 1, 3, 10, 30]) @ q.T
    s = run_chains(GaussianTarget(np.zeros(6), cov),
                   NutsConfig(n_chains=4, tune=1000, draws=2500, seed=5, adapt_mass=True))
    est = np.cov(s.draws.reshape(-1, 6).T)
    np.testing.assert_allclose(np.diag(est), np.diag(cov), rtol=0.10)


def test_double_well_matches_quadrature():
    def logp(x):
        return -2.0 * (x**2 - 1.0) ** 2

    class DoubleWell:
        dim = 1

        def logp_grad(self, q):
            x = q[0]
            return logp(x), np.array([-8.0 * x * (x * x - 1.0)])

        def constrain(self, d):
            return d

        def initial_point(self, rng):
            return rng.uniform(-1, 1, 1)

    s = run_chains(DoubleWell(), NutsConfig(n_chains=4, tune=500, draws=25_000, seed=6))
    edges = np.linspace(-2.5, 2.5, 31)
    counts, _ = np.histogram(s.draws.ravel(), edges)
    z = quad(lambda x: math.exp(logp(x)), -np.inf, np.inf)[0]
    probs = np.array([quad(lambda x: math.exp(logp(x)), a, b)[0] for a, b in zip(edges, edges[1:])]) / z
    tv = 0.5 * np.abs(counts / s.draws.size - probs).sum()
    assert tv < 0.03


# --- adaptation ---------------------------------------------------------------

def test_step_size_fixed_point():
    steps = adapt_step_size(np.full(1000, 0.9), 0.9, 0.3)
    tail = steps[-101:-1]
    assert np.max(np.abs(np.diff(tail)) / tail[1:]) < 1e-3


def test_step_size_direction():
    up = adapt_step_size(np.ones(30), 0.8, 0.1)
    assert np.all(np.diff(up[:-1]) > 0)
    down = adapt_step_size(np.zeros(30), 0.8, 0.1)
    assert down[-2] < 0.1 and down[-1] < 0.1


def test_dual_averaging_converges_to_target():
    # acceptance falls with the step size; the adapted step hits the target
    da = DualAveraging(1.0, 0.8)
    for _ in range(2000):
        da.update(math.exp(-da.step_size))
    assert math.exp(-da.final_step_size) == pytest.approx(0.8, abs=0.01)


def test_initial_step_size_heuristic(rng):
    q = np.zeros(2)
    eps = find_initial_step_size(q, 0.0, np.zeros(2), std_normal, rng, np.ones(2))
    assert 0.1 < eps < 10


def test_mass_windows_layout():
    w = mass_windows(1000)
    assert w[0][0] == 75 and w[-1][1] == 950
    assert all(a[1] == b[0] for a, b in zip(w, w[1:]))
    assert mass_windows(10) == []
    small = mass_windows(100)
    assert small and small[0][0] == 15 and small[-1][1] == 90


def test_diagonal_mass_regularisation(rng):
    m = DiagonalMass(2)
    x = rng.standard_normal((1000, 2)) * [1.0, 10.0]
    for row in x:
        m.add(row)
    np.testing.assert_allclose(m.inverse_mass(), [1.0, 100.0], rtol=0.15)


# --- runs -----------------------------------------------------------------------

def test_run_is_deterministic():
    cfg = NutsConfig(n_chains=2, tune=100, draws=100, seed=11)
    t = GaussianTarget(np.zeros(3), np.eye(3))
    a, b = run_chains(t, cfg), run_chains(t, cfg)
    assert np.array_equal(a.draws, b.draws) and np.array_equal(a.accept_stats, b.accept_stats)
    c = run_chains(t, NutsConfig(n_chains=2, tune=100, draws=100, seed=11, workers=2))
    assert np.array_equal(a.draws, c.draws)


def test_chain_failure_is_structured():
    class Spike:
        # finite density at a single point: every trajectory leaves the support
        dim = 1

        def logp_grad(self, q):
            return (0.0 if q[0] == 1e-20 else -np.inf), np.zeros(1)

        def constrain(self, d):
            return d

        def initial_point(self, rng):
            return np.array([1e-20])

    with pytest.raises(ChainFailure) as err:
        run_chains(Spike(), NutsConfig(n_chains=1, tune=0, draws=20, seed=0))
    assert err.value.chain == 0


def test_config_validation():
    with pytest.raises(ValueError):
        NutsConfig(target_accept=1.0)
    with pytest.raises(ValueError):
        NutsConfig(n_chains=0)
    fast = NutsConfig.fast(seed=2)
    assert (fast.n_chains, fast.tune, fast.draws, fast.adapt_mass) == (1, 500, 500, True)
    assert NutsConfig().adapt_mass is False and NutsConfig().target_accept == 0.9


def test_sample_set_csv(tmp_path):
    s = run_chains(GaussianTarget(np.zeros(2), np.eye(2)), NutsConfig(n_chains=2, tune=50, draws=20, seed=1))
    paths = s.to_csv(tmp_path)
    assert [p.name for p in paths] == ["chain_0.csv", "chain_1.csv"]
    rows = paths[1].read_text().splitlines()
    assert len(rows) == 21 and rows[0].startswith("q0,q1,accept_stat")
    assert float(rows[1].split(",")[0]) == s.draws[1, 0, 0]


# --- summaries ------------------------------------------------------------------

def _sample_set(draws):
    draws = np.asarray(draws, dtype=float)
    shape = draws.shape[:2]
    return SampleSet(draws, np.ones(shape), np.ones(shape, int), np.zeros(shape, bool),
                     np.ones(shape, int), np.ones(shape[0]), np.ones(draws.shape[2]), np.ones(draws.shape[2]))


def test_summarize_examples(rng):
    truth = Pose([5, 5, 2], [0.1, 0.2, 0.3])
    same = _sample_set(np.tile(truth.as_vector(), (2, 10, 1)))
    est = summarize(same, truth)
    assert est.position_error == pytest.approx(0.0, abs=1e-14)
    assert est.rotation_error == pytest.approx(0.0, abs=1e-14)
    shifted = _sample_set(np.tile(truth.as_vector() + [0.3, 0, 0, 0, 0, 0], (1, 5, 1)))
    est = summarize(shifted, truth)
    assert est.position_error == pytest.approx(0.3) and est.rotation_error == 0.0
    sym = truth.as_vector() + rng.standard_normal((1, 40_000, 6)) * 0.1
    assert summarize(_sample_set(sym), truth).position_error < 0.01
    assert summarize(_sample_set(sym), truth, estimator="median").position_error < 0.01
    with pytest.raises(ValueError):
        summarize(same, truth, estimator="mode")


# --- diagnostics ------------------------------------------------------------------

def test_rhat_iid_and_shifted(rng):
    x = rng.standard_normal((4, 1000, 2))
    assert np.all(rhat(x) < 1.01) and np.all(split_rhat(x) < 1.01)
    x[0] += 2.0
    assert np.all(rhat(x) > 1.1)


def test_rhat_constant_chains():
    assert split_rhat(np.ones((2, 10)))[0] == 1.0


def test_ess_matches_ar1_formula(rng):
    phi, n = 0.7, 20_000
    x = np.empty((4, n))
    for c in range(4):
        e = rng.standard_normal(n)
        x[c, 0] = e[0] / math.sqrt(1 - phi**2)
        for t in range(1, n):
            x[c, t] = phi * x[c, t - 1] + e[t]
    expected = 4 * n * (1 - phi) / (1 + phi)
    assert ess_basic(x)[0] == pytest.approx(expected, rel=0.1)
    assert ess_bulk(x)[0] == pytest.approx(expected, rel=0.1)
    # iid draws: single estimates scatter by ~4%, their average is unbiased
    iid = [ess_bulk(rng.standard_normal((4, 2000)))[0] for _ in range(20)]
    assert np.mean(iid) == pytest.approx(8000, rel=0.03)


def test_diagnostics_input_checks():
    with pytest.raises(ValueError):
        rhat(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        rhat(np.zeros(10))


# --- localization posterior ----------------------------------------------------------

def test_localization_calibration():
    """sigma2 = 1e-5, RIS on: R-hat and acceptance statistics over 20 seeded runs."""
    sc = Scenario()
    lo, hi = prior_bounds(sc)
    good_rhat = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        pose = interior_pose(rng)
        obs = draw_observations(perturb_params(channel_params(pose, sc), 1e-5, rng), 1e-3, 50, rng)
        s = run_chains(LocalizationModel(sc, obs), NutsConfig.fast(seed=seed))
        good_rhat += bool(np.all(s.rhat[:3] <= 1.05))
        assert abs(s.accept_stats.mean() - 0.9) <= 0.15
        assert np.all(s.draws[..., :6] > lo) and np.all(s.draws[..., :6] < hi)
        assert np.all(s.draws[..., 6:] > 0)
    assert good_rhat >= 19
