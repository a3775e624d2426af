import numpy as np
import pytest

from subfilter.errors import DimensionMismatch, ValidationError
from subfilter.filters import (FilterState, LinearModelOps, LocalizationTaper, NonlinearModelOps, enkf_step,
                               gaspari_cohn, initial_full_state, initial_reduced_state, kalman_update, kf_step,
                               reconstruct_state, reduced_enkf_step, reduced_kf_step, rokf_step,
                               static_reduced_posterior)
from subfilter.gaussian import GaussianBelief
from subfilter.harness.rokf import loewner_gap
from subfilter.subspace import SubspaceBasis

from conftest import diag_q, plain_basis, random_linear_system, random_spd


def run_pair(rng, d, m, steps=20):
    model = random_linear_system(rng, d, m)
    p = rng.standard_normal((d, d)) + 2 * np.eye(d)
    basis = plain_basis(p)
    x0 = rng.standard_normal(d)
    full = initial_full_state(x0, p @ p.T)
    red = initial_reduced_state(x0, basis)
    for _ in range(steps):
        y = rng.standard_normal(m)
        full = kf_step(full, model, y)
        red = reduced_kf_step(red, model, basis, y)
        yield full, red, basis


def test_reduced_kf_with_full_basis_equals_kf():
    rng = np.random.default_rng(0)
    for full, red, basis in run_pair(rng, 6, 3):
        np.testing.assert_allclose(reconstruct_state(red, basis), full.belief.mean, rtol=1e-9, atol=1e-10)
        np.testing.assert_allclose(basis.P @ red.belief.cov @ basis.P.T, full.belief.cov, rtol=1e-8, atol=1e-10)


def test_kalman_update_scalar_example():
    # prior N(0, 1), y = 1 with unit noise: posterior N(0.5, 0.5)
    xa, ca = kalman_update(np.zeros(1), np.eye(1), np.eye(1), np.ones(1), np.eye(1))
    np.testing.assert_allclose(xa, [0.5])
    np.testing.assert_allclose(ca, [[0.5]])


def test_reduced_step_checks_observation_length():
    rng = np.random.default_rng(1)
    model = random_linear_system(rng, 4, 2)
    basis = plain_basis(np.eye(4)[:, :2])
    with pytest.raises(DimensionMismatch):
        reduced_kf_step(initial_reduced_state(np.zeros(4), basis), model, basis, np.zeros(3))


def test_reduced_filter_counts_r_plus_one_model_applies():
    rng = np.random.default_rng(2)
    model = random_linear_system(rng, 10, 4)
    basis = plain_basis(rng.standard_normal((10, 3)))
    state = initial_reduced_state(np.zeros(10), basis)
    for _ in range(5):
        state = reduced_kf_step(state, model, basis, rng.standard_normal(4))
    assert model.counter.model_applies == 5 * (3 + 1)


def test_reduced_enkf_counts_and_zero_ensemble():
    rng = np.random.default_rng(3)
    model = random_linear_system(rng, 10, 4)
    basis = plain_basis(rng.standard_normal((10, 3)))
    state = initial_reduced_state(np.zeros(10), basis)
    y = rng.standard_normal(4)
    s5 = reduced_enkf_step(state, model, basis, y, n_ens=5, seed=1)
    assert model.counter.evolve == 5 + 1 and model.counter.tangent_evolve == 0
    # n_ens = 0: the prior on alpha comes from Q alone
    s0 = reduced_enkf_step(state, model, basis, y, n_ens=0, seed=1)
    q = model.q.dense()
    hp = model.obs_apply(basis.P)
    info = hp.T @ np.linalg.solve(model.r_cov, hp) + basis.P.T @ np.linalg.solve(q, basis.P)
    np.testing.assert_allclose(s0.belief.cov, np.linalg.inv(info), rtol=1e-9)
    again = reduced_enkf_step(state, model, basis, y, n_ens=5, seed=1)
    np.testing.assert_array_equal(again.belief.mean, s5.belief.mean)


def test_fixed_offset_parameterization_is_consistent():
    rng = np.random.default_rng(4)
    d = 5
    model = random_linear_system(rng, d, 3)
    p = rng.standard_normal((d, d)) + 2 * np.eye(d)
    offset = rng.standard_normal(d)
    basis = plain_basis(p, offset)
    x0 = rng.standard_normal(d)
    a = initial_reduced_state(x0, basis, "fixed_offset")
    np.testing.assert_allclose(reconstruct_state(a, basis, "fixed_offset"), x0, atol=1e-10)
    b = initial_reduced_state(x0, basis)
    for _ in range(10):
        y = rng.standard_normal(3)
        a = reduced_kf_step(a, model, basis, y, "fixed_offset")
        b = reduced_kf_step(b, model, basis, y)
    # with r = d both forms describe the same Gaussian
    np.testing.assert_allclose(reconstruct_state(a, basis, "fixed_offset"), reconstruct_state(b, basis),
                               rtol=1e-8, atol=1e-9)


def test_rokf_prior_is_wider_than_conditional():
    rng = np.random.default_rng(5)
    model = random_linear_system(rng, 8, 3)
    basis = plain_basis(rng.standard_normal((8, 2)))
    state = initial_reduced_state(np.zeros(8), basis)
    y = rng.standard_normal(3)
    wide = rokf_step(state, model, basis, y)
    narrow = reduced_kf_step(state, model, basis, y)
    assert np.linalg.eigvalsh(wide.belief.cov - narrow.belief.cov).min() > -1e-10


def test_loewner_gap_random():
    rng = np.random.default_rng(6)
    for _ in range(50):
        d = rng.integers(2, 12)
        r = rng.integers(1, d + 1)
        q, _ = np.linalg.qr(rng.standard_normal((d, r)))
        assert loewner_gap(random_spd(rng, d, 0.01), q) >= -1e-10


def test_static_posterior_matches_dense_formula():
    rng = np.random.default_rng(7)
    d, m, r = 12, 5, 4
    f = rng.standard_normal((m, d))
    rc = random_spd(rng, m)
    basis = plain_basis(rng.standard_normal((d, r)))
    mu = rng.standard_normal(d)
    y = rng.standard_normal(m)
    post = static_reduced_posterior(f, rc, mu, basis, y)
    fp = f @ basis.P
    psi = np.linalg.inv(fp.T @ np.linalg.solve(rc, fp) + np.eye(r))
    np.testing.assert_allclose(post.cov, psi, rtol=1e-10)
    np.testing.assert_allclose(post.mean, psi @ fp.T @ np.linalg.solve(rc, y - f @ mu), rtol=1e-10)
    # callable forward map gives the same answer
    post2 = static_reduced_posterior(lambda v: f @ v, rc, mu, basis, y)
    np.testing.assert_allclose(post2.mean, post.mean)


def test_gaspari_cohn_values():
    assert gaspari_cohn(0.0, 3.0) == 1.0
    assert gaspari_cohn(3.0, 3.0) == pytest.approx(5 / 24, abs=1e-12)
    assert gaspari_cohn(6.0, 3.0) == 0.0
    assert gaspari_cohn(9.0, 3.0) == 0.0
    z = np.linspace(0, 2.5, 200)
    g = gaspari_cohn(z, 1.0)
    assert np.all(np.diff(g) <= 1e-12)
    with pytest.raises(ValidationError):
        gaspari_cohn(1.0, 0.0)
    t = LocalizationTaper(2.0, 10).matrix()
    np.testing.assert_allclose(t, t.T)
    assert t[0, 9] == t[0, 1]  # periodic


def test_enkf_step_moves_toward_observation():
    d = 6
    h = np.eye(d)[:2]
    model = NonlinearModelOps.with_linear_obs(lambda x: x, h, diag_q(0.01, d), 0.01 * np.eye(2), d)
    state = initial_full_state(np.zeros(d), 1.0)
    y = np.array([1.0, -1.0])
    out = enkf_step(state, model, y, n_ens=200, seed=3)
    np.testing.assert_allclose(out.belief.mean[:2], y, atol=0.1)
    assert out.ensemble.shape == (d, 200)
    with pytest.raises(ValidationError):
        enkf_step(state, model, y, n_ens=1, seed=3)


def test_ensemble_filters_need_linear_observations():
    d = 4
    model = NonlinearModelOps(lambda x: x, lambda x: x[:2] ** 2, diag_q(0.1, d), np.eye(2), d)
    state = initial_full_state(np.zeros(d))
    with pytest.raises(ValidationError):
        enkf_step(state, model, np.zeros(2), 5, 1)


def test_linear_ops_apply_counter_blocks():
    model = LinearModelOps(np.eye(3), np.eye(3)[:1], np.ones(3), np.ones(1))
    model.evolve_apply(np.ones((3, 4)))
    model.obs_apply(np.ones(3))
    assert model.counter.evolve + model.counter.tangent_evolve == 4
    assert isinstance(FilterState(GaussianBelief(np.zeros(1), np.eye(1)), np.zeros(3)).step_index, int)


def test_rokf_equals_reduced_kf_for_full_orthogonal_basis():
    rng = np.random.default_rng(8)
    d = 5
    model = random_linear_system(rng, d, 2)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    basis = SubspaceBasis(q, np.ones(d), "pca", np.zeros(d))
    a = b = initial_reduced_state(rng.standard_normal(d), basis)
    for _ in range(8):
        y = rng.standard_normal(2)
        a = rokf_step(a, model, basis, y)
        b = reduced_kf_step(b, model, basis, y)
    np.testing.assert_allclose(a.belief.mean, b.belief.mean, rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(a.belief.cov, b.belief.cov, rtol=1e-8, atol=1e-10)
