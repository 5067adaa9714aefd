"""Deterministic equivalent, Stieltjes values, and density recovery."""

import numpy as np
import pytest

import covspec.equivalent
from conftest import identity_mixture, mp_density
from covspec.equivalent import resolvent_bounds
from covspec import (
    ClassModel,
    ConvergenceError,
    ParameterError,
    atom_at_zero,
    build_mixture,
    density_prediction,
    deterministic_resolvent,
    empirical_resolvent,
    empirical_stieltjes,
    sigma_delta,
    solve_delta,
    stieltjes_from_delta,
    stieltjes_prediction,
    toeplitz_covariance,
)


def test_identity_equivalent_is_scalar_matrix():
    mix = identity_mixture(8, 16)
    sol = solve_delta(mix, 1.0)
    q = deterministic_resolvent(mix, sol.delta, 1.0)
    # Single class carries weight n_l/n = 1 regardless of the aspect ratio.
    scalar = 1.0 / (1.0 / (1.0 + sol.delta[0]) + 1.0)
    np.testing.assert_allclose(q, scalar * np.eye(8), atol=1e-12)


def test_sigma_delta_weighted_sum():
    t = toeplitz_covariance(0.5, 6)
    c1 = ClassModel(sigma=t, mean=np.zeros(6), n_l=3)
    c2 = ClassModel(sigma=2 * np.eye(6), mean=np.zeros(6), n_l=9)
    mix = build_mixture([c1, c2], 12)
    out = sigma_delta(mix, np.array([1.0, 3.0]))
    expected = (3 / 12) * t / 2.0 + (9 / 12) * 2 * np.eye(6) / 4.0
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_sigma_delta_rejects_pole():
    mix = identity_mixture(4, 4)
    with pytest.raises(ParameterError):
        sigma_delta(mix, np.array([-1.0]))


def test_stieltjes_matches_trace_of_equivalent():
    t = toeplitz_covariance(0.7, 10)
    mix = build_mixture([ClassModel(sigma=t, mean=np.zeros(10), n_l=20)], 20)
    sol = solve_delta(mix, 0.6)
    direct = np.trace(deterministic_resolvent(mix, sol.delta, 0.6)) / 10
    np.testing.assert_allclose(
        stieltjes_from_delta(mix, sol.delta, 0.6), direct, atol=1e-12
    )


def test_stieltjes_fast_path_matches_dense_path(monkeypatch):
    # The joint-eigenbasis shortcut and the dense Cholesky path must agree
    # on the same mixture; disabling the cache forces the dense branch.
    t = toeplitz_covariance(0.4, 8)
    pair = [t, t @ t]
    classes = [ClassModel(sigma=s, mean=np.zeros(8), n_l=4) for s in pair]
    fast = build_mixture(classes, 8)
    assert fast.spectral() is not None
    fast_value = stieltjes_prediction(fast, 1.1)

    import covspec.model

    monkeypatch.setattr(covspec.model.Mixture, "spectral", lambda self: None)
    dense = build_mixture(classes, 8)
    assert dense.spectral() is None
    dense_value = stieltjes_prediction(dense, 1.1)
    np.testing.assert_allclose(fast_value, dense_value, atol=1e-10)


def test_stieltjes_large_z_limit():
    t = toeplitz_covariance(0.5, 12)
    mix = build_mixture([ClassModel(sigma=t, mean=np.zeros(12), n_l=24)], 24)
    z = 1e6
    m = stieltjes_prediction(mix, z)
    assert 0.99 <= m * z <= 1.0


def test_stieltjes_prediction_raises_on_nonconvergence():
    mix = identity_mixture(20, 10)
    with pytest.raises(ConvergenceError) as info:
        stieltjes_prediction(mix, 0.3, max_iter=1)
    assert info.value.solution.iterations == 1
    assert not info.value.solution.converged


@pytest.mark.parametrize(
    "p,n,expected",
    [(30, 15, 0.5), (10, 20, 0.0), (20, 20, 0.0)],
)
def test_atom_at_zero_identity(p, n, expected):
    assert atom_at_zero(identity_mixture(p, n)) == expected


def test_atom_at_zero_rank_deficient_class():
    v = np.arange(1.0, 6.0)
    c = ClassModel(sigma=np.outer(v, v), mean=np.zeros(5), n_l=20)
    mix = build_mixture([c], 20)
    # Rank-one covariance supports only one nonzero sample direction.
    assert atom_at_zero(mix) == pytest.approx(4 / 5)


def test_density_matches_closed_form_inside_support():
    gamma = 0.5
    mix = identity_mixture(100, 200)
    lams = np.array([0.3, 0.8, 1.5, 2.5])
    pred = density_prediction(mix, lams, epsilon=1e-6)
    assert pred.converged.all()
    np.testing.assert_allclose(pred.density, mp_density(lams, gamma), atol=1e-4)


def test_density_vanishes_outside_support():
    mix = identity_mixture(100, 200)
    pred = density_prediction(mix, np.array([4.0, 6.0]), epsilon=1e-6)
    assert np.all(pred.density <= 1e-4)


def test_density_total_mass_with_atom():
    # gamma = 2: half the spectrum is an exact atom at zero.
    mix = identity_mixture(80, 40)
    assert atom_at_zero(mix) == 0.5
    grid = np.linspace(0.05, 6.5, 400)
    pred = density_prediction(mix, grid, epsilon=1e-4)
    bulk = np.trapezoid(pred.density, grid)
    total = bulk + pred.atom_at_zero
    assert 0.97 <= total <= 1.03


def test_density_halving_epsilon_is_stable():
    # Cauchy smoothing converges: the epsilon/2 -> epsilon/4 step is no
    # larger than twice the epsilon -> epsilon/2 step on smooth points.
    mix = identity_mixture(60, 120)
    lams = np.array([0.5, 1.0, 1.8])
    eps = 1e-2
    f1 = density_prediction(mix, lams, epsilon=eps).density
    f2 = density_prediction(mix, lams, epsilon=eps / 2).density
    f4 = density_prediction(mix, lams, epsilon=eps / 4).density
    step12 = np.abs(f1 - f2)
    step24 = np.abs(f2 - f4)
    assert np.all(step24 <= 2.0 * step12 + 1e-12)


def test_density_grid_validation():
    mix = identity_mixture(4, 8)
    with pytest.raises(ParameterError):
        density_prediction(mix, np.array([1.0, 1.0]), epsilon=1e-3)
    with pytest.raises(ParameterError):
        density_prediction(mix, np.array([2.0, 1.0]), epsilon=1e-3)
    with pytest.raises(ParameterError):
        density_prediction(mix, np.array([1.0]), epsilon=0.0)


def test_density_single_point_grid():
    mix = identity_mixture(4, 8)
    pred = density_prediction(mix, np.array([1.0]), epsilon=1e-4)
    assert pred.density.shape == (1,)
    assert pred.density[0] >= 0


def test_density_workers_do_not_change_values():
    t = toeplitz_covariance(0.3, 30)
    mix = build_mixture([ClassModel(sigma=t, mean=np.zeros(30), n_l=60)], 60)
    grid = np.linspace(0.05, 1.2, 40)
    single = density_prediction(mix, grid, epsilon=1e-3, workers=1)
    multi = density_prediction(mix, grid, epsilon=1e-3, workers=4)
    np.testing.assert_array_equal(single.density, multi.density)
    np.testing.assert_array_equal(single.converged, multi.converged)


def test_empirical_resolvent_exact_two_by_two():
    x = np.sqrt(2.0) * np.eye(2)
    np.testing.assert_allclose(
        empirical_resolvent(x, 3.0), np.eye(2) / 4.0, atol=1e-14
    )
    np.testing.assert_allclose(empirical_stieltjes(x, 3.0), 0.25, atol=1e-14)


def test_resolvent_bounds_hold_on_random_inputs(rng, monkeypatch):
    monkeypatch.setattr(covspec.equivalent, "DEBUG_CHECKS", True)
    for _ in range(100):
        p = int(rng.integers(1, 12))
        n = int(rng.integers(1, 12))
        z = float(rng.uniform(0.05, 10.0))
        x = rng.standard_normal((p, n)) * rng.uniform(0.1, 3.0)
        q = empirical_resolvent(x, z)  # internal checks armed
        bounds = resolvent_bounds(x, z, q)
        assert bounds["resolvent"] <= 1.0 / z + 1e-10
        assert bounds["resolvent_covariance"] <= 1.0 + 1e-10
        assert bounds["resolvent_data"] <= 1.0 / np.sqrt(z) + 1e-10


def test_empirical_stieltjes_matches_eigenvalues(rng):
    x = rng.standard_normal((6, 9))
    s = x @ x.T / 9
    vals = np.linalg.eigvalsh((s + s.T) / 2)
    np.testing.assert_allclose(
        empirical_stieltjes(x, 2.0), np.mean(1.0 / (vals + 2.0)), atol=1e-12
    )
