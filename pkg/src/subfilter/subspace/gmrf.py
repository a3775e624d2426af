"""GMRF covariance from a linear finite-element discretization of the SPDE

    (gamma - div(kappa grad))^(alpha/2) x = white noise

on a periodic 1-D mesh, with mass lumping and MAP estimation of (gamma, log kappa).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import AssemblyFailed, EigDecompFailed, OptimFailed, ValidationError
from .basis import SnapshotSet, SubspaceBasis, _fix_signs, build_basis
from .gp import _run_lbfgs

DENSE_LIMIT = 512


@dataclass(frozen=True)
class RingMesh:
    """Periodic 1-D mesh; element e joins node e and node (e + 1) mod J."""

    lengths: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.lengths, dtype=float)
        if h.ndim != 1 or h.size < 3 or np.any(h <= 0):
            raise ValidationError("a ring mesh needs at least 3 positive element lengths")
        object.__setattr__(self, "lengths", h)

    @classmethod
    def uniform(cls, n_nodes: int, spacing: float = 1.0) -> "RingMesh":
        return cls(np.full(n_nodes, float(spacing)))

    @property
    def n_nodes(self) -> int:
        return self.lengths.size

    @property
    def heads(self) -> np.ndarray:
        return np.arange(self.n_nodes)

    @property
    def tails(self) -> np.ndarray:
        return (np.arange(self.n_nodes) + 1) % self.n_nodes

    def lumped_mass(self) -> np.ndarray:
        """Row sums of the P1 mass matrix: half of each adjacent element length."""
        h = self.lengths
        return 0.5 * (h + np.roll(h, 1))

    def stiffness(self, kappa: np.ndarray) -> sp.csr_matrix:
        """Stiffness matrix with kappa linear on each element."""
        kappa = np.asarray(kappa, dtype=float)
        if kappa.shape != (self.n_nodes,):
            raise ValidationError("kappa must have one value per node")
        if not np.all(np.isfinite(kappa)) or np.any(kappa <= 0):
            raise AssemblyFailed("kappa must be finite and positive")
        a, b = self.heads, self.tails
        c = (kappa[a] + kappa[b]) / (2.0 * self.lengths)
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([a, b, b, a])
        vals = np.concatenate([c, c, -c, -c])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_nodes, self.n_nodes))


@dataclass(frozen=True)
class GmrfModel:
    alpha_hat: int
    gamma: float
    nu: np.ndarray
    mesh: RingMesh
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.alpha_hat not in (1, 2, 3, 4):
            raise ValidationError(f"alpha_hat must be in 1..4, got {self.alpha_hat}")
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive")
        nu = np.asarray(self.nu, dtype=float)
        if nu.shape != (self.mesh.n_nodes,):
            raise ValidationError("nu must have one value per mesh node")
        object.__setattr__(self, "nu", nu)

    @property
    def kappa(self) -> np.ndarray:
        return np.exp(self.nu)

    def operator(self) -> sp.csr_matrix:
        """A = K(kappa) + gamma * diag(lumped mass)."""
        return (self.mesh.stiffness(self.kappa) + sp.diags(self.gamma * self.mesh.lumped_mass())).tocsr()


def gmrf_assemble_precision(model: GmrfModel) -> sp.csr_matrix:
    """Omega(1) = A and Omega(k) = Omega(k-1) D^-1 A with D the lumped mass times gamma."""
    a = model.operator()
    dinv = sp.diags(1.0 / (model.gamma * model.mesh.lumped_mass()))
    omega = a
    for _ in range(model.alpha_hat - 1):
        omega = omega @ (dinv @ a)
    omega = omega.tocsr()
    if not np.all(np.isfinite(omega.data)):
        raise AssemblyFailed("precision has non-finite entries")
    return omega


@dataclass(frozen=True)
class GmrfPrior:
    """Exponential prior on gamma and Gaussian prior N(nu0, Omega_nu^-1) on nu."""

    gamma_rate: float
    nu0: np.ndarray
    omega_nu: np.ndarray

    @classmethod
    def default(cls, n_nodes: int, gamma_rate: float = 1.0, tau: float = 10.0,
                ridge: float = 1e-2) -> "GmrfPrior":
        """Smoothness prior tau * (L + ridge I), L the second-difference matrix of the ring.

        The ridge makes the prior proper in the constant direction.
        """
        lap = 2.0 * np.eye(n_nodes) - np.roll(np.eye(n_nodes), 1, axis=1) - np.roll(np.eye(n_nodes), -1, axis=1)
        return cls(gamma_rate, np.zeros(n_nodes), tau * (lap + ridge * np.eye(n_nodes)))


def _inverse_entries(a: sp.csr_matrix, heads, tails):
    """log|A|, diag(A^-1) and A^-1[head, tail] for an SPD matrix A."""
    j = a.shape[0]
    if j < DENSE_LIMIT:
        cho = sla.cho_factor(a.toarray(), lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
        inv = sla.cho_solve(cho, np.eye(j))
        return logdet, np.diag(inv).copy(), inv[heads, tails]
    lu = spla.splu(a.tocsc())
    logdet = float(np.sum(np.log(np.abs(lu.U.diagonal()))))
    diag = np.empty(j)
    off = np.empty(len(heads))
    pos = {int(h): i for i, h in enumerate(heads)}
    for start in range(0, j, 256):
        cols = np.arange(start, min(start + 256, j))
        block = np.zeros((j, cols.size))
        block[cols, np.arange(cols.size)] = 1.0
        sol = lu.solve(block)
        diag[cols] = sol[cols, np.arange(cols.size)]
        for k, c in enumerate(cols):
            # column c of A^-1 holds A^-1[head, tail] for the element whose tail is c
            i = pos.get(int((c - 1) % j))
            if i is not None and int(tails[i]) == c:
                off[i] = sol[heads[i], k]
    return logdet, diag, off


def gmrf_objective(gamma: float, nu: np.ndarray, data: np.ndarray, alpha_hat: int, mesh: RingMesh,
                   prior: GmrfPrior, n_scale: float | None = None):
    """Log posterior of (gamma, nu) for centered data columns, with its gradient.

    The log-determinant enters with weight ``n_scale / 2`` (default: the number of
    snapshots), as for N independent draws. Returns ``(value, dgamma, dnu)``.
    """
    z = np.atleast_2d(np.asarray(data, dtype=float))
    if z.shape[0] != mesh.n_nodes:
        z = z.T if z.shape[1] == mesh.n_nodes else z
    n = z.shape[1] if n_scale is None else n_scale
    model = GmrfModel(alpha_hat, gamma, nu, mesh)
    m = mesh.lumped_mass()
    dmass = gamma * m
    a = model.operator()
    kappa = model.kappa
    heads, tails = mesh.heads, mesh.tails
    h = mesh.lengths

    # U_p = (D^-1 A)^p Z
    us = [z]
    for _ in range(alpha_hat):
        us.append((a @ us[-1]) / dmass[:, None])
    quad = float(np.sum(us[0] * (dmass[:, None] * us[alpha_hat])))
    dq_gamma = sum(np.sum(us[p] * (m[:, None] * us[alpha_hat - 1 - p])) for p in range(alpha_hat))
    dq_gamma -= sum(np.sum(us[p] * (m[:, None] * us[alpha_hat - p])) for p in range(1, alpha_hat))
    edge_w = np.zeros(mesh.n_nodes)
    for p in range(alpha_hat):
        dp = us[p][tails] - us[p][heads]
        dr = us[alpha_hat - 1 - p][tails] - us[alpha_hat - 1 - p][heads]
        edge_w += np.sum(dp * dr, axis=1)
    edge_w /= 2.0 * h
    dq_nu = kappa * (edge_w + np.roll(edge_w, 1))  # node k is the head of e=k and tail of e=k-1

    try:
        logdet_a, inv_diag, inv_off = _inverse_entries(a, heads, tails)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise AssemblyFailed(f"operator is not positive definite: {exc}") from exc
    logdet_d = float(np.sum(np.log(dmass)))
    logdet = alpha_hat * logdet_a - (alpha_hat - 1) * logdet_d
    dld_gamma = alpha_hat * float(np.sum(m * inv_diag)) - (alpha_hat - 1) * mesh.n_nodes / gamma
    e_w = (inv_diag[heads] + inv_diag[tails] - 2.0 * inv_off) / (2.0 * h)
    dld_nu = alpha_hat * kappa * (e_w + np.roll(e_w, 1))

    dn = nu - prior.nu0
    pnu = prior.omega_nu @ dn
    value = 0.5 * n * logdet - 0.5 * quad - 0.5 * float(dn @ pnu) + np.log(prior.gamma_rate) - prior.gamma_rate * gamma
    dgamma = 0.5 * n * dld_gamma - 0.5 * dq_gamma - prior.gamma_rate
    dnu = 0.5 * n * dld_nu - 0.5 * dq_nu - pnu
    return float(value), float(dgamma), dnu


def gmrf_map_fit(snaps: SnapshotSet | np.ndarray, alpha_hat: int = 2, prior: GmrfPrior | None = None,
                 mesh: RingMesh | None = None, init_gamma: float = 1.0, init_nu: np.ndarray | None = None,
                 mean: np.ndarray | None = None, max_iter: int = 1000) -> GmrfModel:
    """MAP estimate of (gamma, nu) by L-BFGS on (log gamma, nu) with the analytic gradient.

    A two-parameter fit with constant nu provides the starting point. Raises
    :class:`OptimFailed` with the best iterate when the gradient test fails.
    """
    x = snaps.snapshots if isinstance(snaps, SnapshotSet) else np.atleast_2d(np.asarray(snaps, dtype=float))
    j = x.shape[0]
    mesh = mesh or RingMesh.uniform(j)
    prior = prior or GmrfPrior.default(j)
    mu = x.mean(axis=1) if mean is None else np.asarray(mean, dtype=float)
    z = x - mu[:, None]
    nu_start = np.zeros(j) if init_nu is None else np.asarray(init_nu, dtype=float)

    def fun_full(v):
        lg, nu = v[0], v[1:]
        try:
            val, dg, dnu = gmrf_objective(np.exp(lg), nu, z, alpha_hat, mesh, prior)
        except AssemblyFailed:
            return np.inf, np.zeros_like(v)
        if not np.isfinite(val):
            return np.inf, np.zeros_like(v)
        cache_full[v.tobytes()] = -val
        return -val, -np.concatenate([[dg * np.exp(lg)], dnu])

    def fun_const(v):
        f, g = fun_full(np.concatenate([[v[0]], nu_start + v[1]]))
        return f, np.array([g[0], g[1:].sum()])

    cache_full: dict[bytes, float] = {}
    try:
        pilot = _run_lbfgs(fun_const, np.array([np.log(init_gamma), 0.0]), {}, max_iter, lambda v, d: v)
    except OptimFailed as exc:
        pilot = exc.best
    v0 = np.concatenate([[pilot[0]], nu_start + pilot[1]])

    def build(v, diag):
        return GmrfModel(alpha_hat, float(np.exp(v[0])), v[1:].copy(), mesh, diagnostics=diag)

    return _run_lbfgs(fun_full, v0, cache_full, max_iter, build)


def basis_from_precision(model: GmrfModel, r: int, offset: np.ndarray | None = None,
                         config_hash: str = "") -> SubspaceBasis:
    """Leading eigenpairs of Omega^-1, i.e. the trailing eigenpairs of Omega."""
    omega = gmrf_assemble_precision(model).toarray()
    j = omega.shape[0]
    if not 1 <= r <= j:
        raise ValidationError(f"r={r} outside 1..{j}")
    try:
        mu, u = np.linalg.eigh(0.5 * (omega + omega.T))
    except np.linalg.LinAlgError as exc:
        raise EigDecompFailed(str(exc)) from exc
    if mu[0] <= 0:
        raise EigDecompFailed("precision is not positive definite")
    lam = 1.0 / mu[:r]
    offset = np.zeros(j) if offset is None else offset
    return build_basis(lam, _fix_signs(u[:, :r]), offset, "gmrf", config_hash)
