import numpy as np
import pytest

from subfilter.errors import AssemblyFailed, OptimFailed, ValidationError
from subfilter.subspace import (GmrfModel, GmrfPrior, KernelParams, LogNormalPrior, RingMesh, SnapshotSet,
                                SubspaceBasis, basis_from_precision, build_basis, cumulative_energy,
                                empirical_covariance, gmrf_assemble_precision, gmrf_map_fit, gmrf_objective,
                                gp_basis, gp_log_likelihood, gp_map_fit, kernel_matrix, leading_eigenpairs,
                                pca_basis, ring_distance, sq_exp_kernel)
from subfilter.subspace.gmrf import _inverse_entries


def test_ring_distance_examples():
    assert ring_distance(0, 9, 10) == 1
    assert ring_distance(2, 7, 10) == 5
    assert ring_distance(3, 3, 10) == 0


def test_empirical_covariance_example():
    snaps = SnapshotSet(np.array([[1.0, 3.0], [2.0, 2.0]]))
    mean, cov = empirical_covariance(snaps)
    np.testing.assert_allclose(mean, [2.0, 2.0])
    np.testing.assert_allclose(cov, [[2.0, 0.0], [0.0, 0.0]])


def test_leading_eigenpairs_and_basis_example():
    lam, u = leading_eigenpairs(np.diag([1.0, 4.0, 2.0]), 2)
    np.testing.assert_allclose(lam, [4.0, 2.0])
    np.testing.assert_allclose(np.abs(u), np.eye(3)[:, [1, 2]])
    assert np.all(u.max(axis=0) > 0)
    b = build_basis(lam, u, np.zeros(3))
    np.testing.assert_allclose(b.P, [[0, 0], [2, 0], [0, np.sqrt(2)]])


def test_basis_invariants_and_zero_eigenvalues():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((8, 30))
    basis = pca_basis(SnapshotSet(x), 8)
    _, cov = empirical_covariance(SnapshotSet(x))
    np.testing.assert_allclose(basis.P @ basis.P.T, cov, atol=1e-12)
    np.testing.assert_allclose(basis.P.T @ basis.P, np.diag(basis.eigenvalues), atol=1e-12)
    with pytest.warns(RuntimeWarning):
        b = build_basis(np.array([1.0, 0.0]), np.eye(2), np.zeros(2))
    assert b.zero_columns == 1 and np.all(b.P[:, 1] == 0)
    with pytest.raises(ValidationError):
        build_basis(np.array([1.0, 2.0]), np.eye(2), np.zeros(2))


def test_energy_fractions():
    e = cumulative_energy(np.array([3.0, 1.0, 0.0]))
    np.testing.assert_allclose(e.fractions, [0.75, 1.0, 1.0])
    assert not e.degenerate
    assert cumulative_energy(np.zeros(3)).degenerate


def test_snapshot_validation_and_csv_roundtrip(tmp_path):
    with pytest.raises(ValidationError):
        SnapshotSet(np.ones((4, 1)))
    with pytest.raises(ValidationError):
        SnapshotSet(np.array([[1.0, np.nan], [0.0, 1.0]]))
    snaps = SnapshotSet(np.random.default_rng(1).standard_normal((5, 7)))
    snaps.save_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "dim=5, n=7, mesh=ring"
    np.testing.assert_array_equal(SnapshotSet.load_csv(tmp_path / "s.csv").snapshots, snaps.snapshots)


def test_basis_save_load(tmp_path):
    basis = pca_basis(SnapshotSet(np.random.default_rng(2).standard_normal((6, 20))), 3, "abc")
    basis.save(tmp_path / "b.npz")
    back = SubspaceBasis.load(tmp_path / "b.npz")
    np.testing.assert_array_equal(back.P, basis.P)
    np.testing.assert_array_equal(back.offset, basis.offset)
    assert back.config_hash == "abc" and back.source == "pca"


def test_kernel_examples():
    p = KernelParams(2.0, 3.0)
    assert sq_exp_kernel(0, 0, p) == 2.0
    assert sq_exp_kernel(0, 3, p) == pytest.approx(2.0 * np.exp(-1.0))
    assert sq_exp_kernel(0, 9, p, ring=10) == pytest.approx(2.0 * np.exp(-1.0 / 9.0))
    with pytest.raises(ValidationError):
        KernelParams(0.0, 1.0)


def test_gp_likelihood_gradient():
    rng = np.random.default_rng(3)
    d = 20
    idx = np.arange(d)
    dist = ring_distance(idx[:, None], idx[None, :], d).astype(float)
    z = rng.standard_normal((d, 15))
    s = z @ z.T
    phi = np.log([1.5, 2.0])
    def ll(p):
        return gp_log_likelihood(p, s, 15, dist, 1e-2)

    _, g = ll(phi)
    eps = 1e-6
    fd = [(ll(phi + eps * e)[0] - ll(phi - eps * e)[0]) / (2 * eps) for e in np.eye(2)]
    np.testing.assert_allclose(g, fd, rtol=1e-5)
    _, gp = LogNormalPrior().logpdf_and_grad(phi)
    np.testing.assert_allclose(gp, -phi / 9.0 - 1.0)


def test_gp_map_recovers_synthetic_parameters():
    d, n = 60, 256
    idx = np.arange(d)
    dist = ring_distance(idx[:, None], idx[None, :], d).astype(float)
    truth = KernelParams(2.0, 5.0)
    chol = np.linalg.cholesky(kernel_matrix(truth, dist, 1e-6))
    x = chol @ np.random.default_rng(4).standard_normal((d, n))
    fit = gp_map_fit(x, mean=np.zeros(d))
    assert abs(fit.theta1 - 2.0) / 2.0 < 0.2
    assert abs(fit.theta2 - 5.0) / 5.0 < 0.2
    hist = np.array(fit.diagnostics["history"])
    assert np.all(np.diff(hist) >= -1e-9 * np.abs(hist[1:]))
    basis = gp_basis(SnapshotSet(x), fit, 10)
    assert basis.source == "gp" and basis.rank == 10


def test_gp_fit_needs_two_snapshots():
    with pytest.raises(OptimFailed):
        gp_map_fit(np.ones((10, 1)))


def test_mesh_and_assembly():
    mesh = RingMesh.uniform(6, 2.0)
    np.testing.assert_allclose(mesh.lumped_mass(), 2.0)
    k = mesh.stiffness(np.ones(6)).toarray()
    np.testing.assert_allclose(k.sum(axis=1), 0.0, atol=1e-14)
    np.testing.assert_allclose(np.diag(k), 1.0)
    with pytest.raises(AssemblyFailed):
        mesh.stiffness(np.r_[np.ones(5), 0.0])
    with pytest.raises(ValidationError):
        RingMesh(np.ones(2))


def test_precision_alpha_one_is_circulant_and_alpha_two_formula():
    mesh = RingMesh.uniform(8)
    m1 = GmrfModel(1, 0.5, np.zeros(8), mesh)
    a = gmrf_assemble_precision(m1).toarray()
    for s in range(8):
        np.testing.assert_allclose(np.roll(np.roll(a, s, 0), s, 1), a)
    np.testing.assert_allclose(a[0, :3], [2.5, -1.0, 0.0])
    m2 = GmrfModel(2, 0.5, np.zeros(8), mesh)
    np.testing.assert_allclose(gmrf_assemble_precision(m2).toarray(), a @ a / 0.5, atol=1e-12)
    with pytest.raises(ValidationError):
        GmrfModel(5, 0.5, np.zeros(8), mesh)


def test_precision_without_diffusion_is_diagonal():
    mesh = RingMesh.uniform(10)
    om = gmrf_assemble_precision(GmrfModel(2, 3.0, np.full(10, -40.0), mesh)).toarray()
    np.testing.assert_allclose(om, 3.0 * np.eye(10), atol=1e-12)


@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_gmrf_gradient_matches_finite_difference(alpha):
    rng = np.random.default_rng(5)
    j = 16
    mesh = RingMesh(rng.uniform(0.5, 1.5, j))
    prior = GmrfPrior.default(j)
    z = rng.standard_normal((j, 9))
    nu = 0.3 * rng.standard_normal(j)
    gamma = 0.7
    _, dg, dnu = gmrf_objective(gamma, nu, z, alpha, mesh, prior)
    eps = 1e-6
    fg = (gmrf_objective(gamma + eps, nu, z, alpha, mesh, prior)[0]
          - gmrf_objective(gamma - eps, nu, z, alpha, mesh, prior)[0]) / (2 * eps)
    assert dg == pytest.approx(fg, rel=1e-5, abs=1e-6)
    for k in (0, 7):
        e = np.zeros(j)
        e[k] = eps
        fk = (gmrf_objective(gamma, nu + e, z, alpha, mesh, prior)[0]
              - gmrf_objective(gamma, nu - e, z, alpha, mesh, prior)[0]) / (2 * eps)
        assert dnu[k] == pytest.approx(fk, rel=1e-5, abs=1e-6)


def test_inverse_entries_dense_and_sparse_agree():
    mesh = RingMesh.uniform(600)
    a = GmrfModel(1, 0.3, np.zeros(600), mesh).operator()
    ld, dg, off = _inverse_entries(a, mesh.heads, mesh.tails)
    inv = np.linalg.inv(a.toarray())
    assert ld == pytest.approx(np.linalg.slogdet(a.toarray())[1], rel=1e-10)
    np.testing.assert_allclose(dg, np.diag(inv), rtol=1e-8)
    np.testing.assert_allclose(off, inv[mesh.heads, mesh.tails], rtol=1e-8)


def test_strong_prior_pins_nu():
    j = 12
    rng = np.random.default_rng(6)
    prior = GmrfPrior(1.0, np.full(j, 0.5), 1e8 * np.eye(j))
    fit = gmrf_map_fit(rng.standard_normal((j, 20)), alpha_hat=1, prior=prior)
    np.testing.assert_allclose(fit.nu, 0.5, atol=1e-3)


def test_gmrf_recovers_marginal_variance():
    j, n = 40, 256
    mesh = RingMesh.uniform(j)
    truth = GmrfModel(2, 0.2, np.full(j, np.log(2.0)), mesh)
    om = gmrf_assemble_precision(truth).toarray()
    cov = np.linalg.inv(om)
    x = np.linalg.cholesky(cov) @ np.random.default_rng(7).standard_normal((j, n))
    fit = gmrf_map_fit(x, alpha_hat=2, mean=np.zeros(j))
    var_fit = np.diag(np.linalg.inv(gmrf_assemble_precision(fit).toarray()))
    np.testing.assert_allclose(var_fit, np.diag(cov), rtol=0.25)
    hist = np.array(fit.diagnostics["history"])
    assert hist[-1] >= hist[0]


def test_basis_from_precision_is_eigen_decomposition():
    mesh = RingMesh.uniform(30)
    model = GmrfModel(2, 0.1, np.zeros(30), mesh)
    basis = basis_from_precision(model, 6)
    om = gmrf_assemble_precision(model).toarray()
    u = basis.P / np.sqrt(basis.eigenvalues)
    np.testing.assert_allclose(om @ u, u / basis.eigenvalues, atol=1e-9)
    assert np.all(np.diff(basis.eigenvalues) <= 1e-12)
    # the constant vector is an eigenvector of Omega with eigenvalue gamma
    np.testing.assert_allclose(basis.eigenvalues[0], 1.0 / 0.1, rtol=1e-9)


def test_higher_alpha_concentrates_energy():
    mesh = RingMesh.uniform(64)
    fracs = []
    for alpha in (2, 4):
        lam = basis_from_precision(GmrfModel(alpha, 0.05, np.zeros(64), mesh), 64).eigenvalues
        fracs.append(cumulative_energy(lam).fractions[7])
    assert fracs[1] > fracs[0]
