import math

import numpy as np
import pytest

from gaspower import stochastic
from gaspower.problem import Timeline
from gaspower.stochastic import OUPParams, apply_cutoff, em_step, substep_count


def test_em_step_fixed_point_and_forced_value():
    assert em_step(1.0, 1.0, 3.0, 0.0, 0.1, 0.0) == 1.0
    assert em_step(0.0, 1.0, 1.0, 0.0, 0.1, 0.0) == pytest.approx(0.1)


def test_em_step_noise_scaling():
    # the noise term realizes variance h through sqrt(h) * xi
    h, xi = 0.04, 1.7
    assert em_step(0.0, 0.0, 1.0, 2.0, h, xi) == pytest.approx(
        2.0 * math.sqrt(h) * xi)


def test_cutoff_bands():
    assert apply_cutoff(1.5, 1.0, 0.4) == pytest.approx(1.4)
    assert apply_cutoff(-1.5, -1.0, 0.4) == pytest.approx(-1.4)
    assert apply_cutoff(0.9, 1.0, 0.4) == 0.9
    assert apply_cutoff(0.1, 0.0, 0.4) == 0.0
    assert apply_cutoff(0.5, 1.0, 0.4) == pytest.approx(0.6)


def test_substep_count_rules():
    params = OUPParams(theta=3.0, sigma=0.1, time_unit_s=3600.0)
    # stepsize rule: dt_normalized / n <= 0.1/theta
    assert substep_count(1800.0, params) == 15
    # a user minimum only raises the count
    assert substep_count(1800.0, params, min_substeps=21) == 21
    assert substep_count(1e-3, params, min_substeps=1) == 1


def test_substep_count_satisfies_stability_bound():
    rng = np.random.default_rng(9)
    for _ in range(300):
        theta = float(rng.uniform(0.1, 10.0))
        dt = float(rng.uniform(1.0, 72000.0))
        params = OUPParams(theta=theta, sigma=0.2, time_unit_s=3600.0)
        n = substep_count(dt, params, min_substeps=int(rng.integers(1, 50)))
        assert dt / 3600.0 / n < 2.0 / theta


def test_ensemble_matches_discrete_chain_moments():
    """The sampled chain must reproduce the exact moments of the recursion
    P_{n+1} = P_n + theta (mu - P_n) h + sigma sqrt(h) xi, namely
    mean mu + (p0-mu) r^n and variance sigma^2 h (1-r^{2n})/(1-r^2), r = 1-theta h."""
    theta, sigma, mu, p0 = 3.0, 0.45, 1.0, 0.3
    h = 0.1 / theta
    n_steps, n_paths = 40, 200_000
    rng = np.random.default_rng(1234)
    final = stochastic.em_ensemble(p0, mu, theta, sigma, h, n_steps, n_paths,
                                   rng, cutoff=None)
    r = 1.0 - theta * h
    mean_exact = mu + (p0 - mu) * r**n_steps
    var_exact = sigma**2 * h * (1 - r**(2 * n_steps)) / (1 - r**2)
    se_mean = final.std(ddof=1) / math.sqrt(n_paths)
    se_var = var_exact * math.sqrt(2.0 / (n_paths - 1))
    assert abs(final.mean() - mean_exact) < 3 * se_mean
    assert abs(final.var(ddof=1) - var_exact) < 3 * se_var


def test_mean_reversion_monotone_without_noise():
    params = OUPParams(theta=3.0, sigma=0.0)
    rng = np.random.default_rng(0)
    path = stochastic.em_trajectories(0.2, 1.0, 3.0, 0.0, 0.1 / 3.0, 60, 1,
                                      rng)[:, 0]
    gaps = np.abs(path - 1.0)
    assert np.all(np.diff(gaps) < 0)


def test_trajectories_respect_cutoff_band():
    rng = np.random.default_rng(77)
    paths = stochastic.em_trajectories(1.0, 1.0, 3.0, 0.45, 0.1 / 3.0, 100,
                                       1000, rng, cutoff=0.4)
    assert paths.min() >= 0.6 - 1e-15
    assert paths.max() <= 1.4 + 1e-15


def test_realized_path_deterministic_given_seed():
    mean = Timeline(np.array([0.0, 86400.0]), np.array([1.0, 2.0]))
    params = OUPParams(theta=3.0, sigma=0.45)
    t = np.arange(0, 86401, 1800, dtype=float)
    a = stochastic.realize_path(mean, params, t, 1.0, 42, "n1", "P", 21)
    b = stochastic.realize_path(mean, params, t, 1.0, 42, "n1", "P", 21)
    assert np.array_equal(a, b)
    c = stochastic.realize_path(mean, params, t, 1.0, 43, "n1", "P", 21)
    assert not np.array_equal(a, c)


def test_zero_sigma_returns_mean_exactly():
    mean = Timeline(np.array([0.0, 43200.0, 86400.0]),
                    np.array([1.0, 3.0, 2.0]))
    params = OUPParams(theta=3.0, sigma=0.0)
    t = np.arange(0, 86401, 1800, dtype=float)
    path = stochastic.realize_path(mean, params, t, 5.0, 1, "n1", "P")
    assert np.array_equal(path, mean(t))


def test_realized_path_respects_band_with_varying_mean():
    mean = Timeline(np.array([0.0, 86400.0]), np.array([2.0, 4.0]))
    params = OUPParams(theta=3.0, sigma=0.45, cutoff=0.4)
    t = np.arange(0, 86401, 1800, dtype=float)
    for seed in range(5):
        path = stochastic.realize_path(mean, params, t, 2.0, seed, "n1", "P")
        mu = mean(t)
        assert np.all(path >= 0.6 * mu - 1e-12)
        assert np.all(path <= 1.4 * mu + 1e-12)


def test_distinct_node_streams_are_independent():
    g1 = stochastic.path_generator(42, "node_a", "P")
    g2 = stochastic.path_generator(42, "node_b", "P")
    g3 = stochastic.path_generator(42, "node_a", "Q")
    a = g1.standard_normal(100_000)
    b = g2.standard_normal(100_000)
    c = g3.standard_normal(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.02


def test_invalid_parameters_rejected():
    with pytest.raises(stochastic.StochasticError):
        OUPParams(theta=0.0, sigma=0.1)
    with pytest.raises(stochastic.StochasticError):
        OUPParams(theta=1.0, sigma=-0.1)
    with pytest.raises(stochastic.StochasticError):
        OUPParams(theta=1.0, sigma=0.1, cutoff=1.5)
