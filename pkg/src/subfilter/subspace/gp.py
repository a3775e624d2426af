"""Stationary squared-exponential GP covariance fitted to snapshots by MAP estimation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from ..errors import OptimFailed, ValidationError
from .basis import SnapshotSet, SubspaceBasis, build_basis, leading_eigenpairs, ring_distance


@dataclass(frozen=True)
class KernelParams:
    theta1: float  # variance
    theta2: float  # correlation length, grid units
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not (self.theta1 > 0 and self.theta2 > 0):
            raise ValidationError(f"kernel parameters must be positive, got ({self.theta1}, {self.theta2})")


@dataclass(frozen=True)
class LogNormalPrior:
    """Independent log-normal densities on theta1 and theta2."""

    log_mean: tuple[float, float] = (0.0, 0.0)
    log_sd: tuple[float, float] = (3.0, 3.0)

    def logpdf_and_grad(self, phi: np.ndarray):
        """Log density of theta = exp(phi) and its gradient w.r.t. phi."""
        m = np.asarray(self.log_mean)
        s = np.asarray(self.log_sd)
        val = -0.5 * np.sum(((phi - m) / s) ** 2) - np.sum(phi)
        grad = -(phi - m) / s**2 - 1.0
        return float(val), grad


def sq_exp_kernel(si, sj, params: KernelParams, ring: int | None = None):
    """theta1 * exp(-(dist / theta2)^2); ``ring`` selects the periodic grid distance."""
    if ring is not None:
        dist = ring_distance(si, sj, ring)
    else:
        dist = np.abs(np.asarray(si, dtype=float) - np.asarray(sj, dtype=float))
    return params.theta1 * np.exp(-((np.asarray(dist, dtype=float) / params.theta2) ** 2))


def kernel_matrix(params: KernelParams, dist: np.ndarray, nugget: float = 1e-6) -> np.ndarray:
    """Kernel matrix plus ``nugget * theta1`` on the diagonal."""
    k = params.theta1 * np.exp(-((dist / params.theta2) ** 2))
    k[np.diag_indices_from(k)] += nugget * params.theta1
    return k


def gp_log_likelihood(phi: np.ndarray, scatter: np.ndarray, n: int, dist: np.ndarray, nugget: float = 1e-6):
    """Log-likelihood (up to a constant) of n centered snapshots with scatter matrix ``scatter``.

    ``phi = log(theta)``. Returns the value and its gradient w.r.t. ``phi``.
    """
    t1, t2 = np.exp(phi)
    shape = np.exp(-((dist / t2) ** 2))
    sigma = t1 * shape
    sigma[np.diag_indices_from(sigma)] += nugget * t1
    cho = sla.cho_factor(sigma, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
    sinv = sla.cho_solve(cho, np.eye(sigma.shape[0]))
    sinv_s = sinv @ scatter
    val = -0.5 * n * logdet - 0.5 * np.trace(sinv_s)
    w = sinv_s @ sinv
    d1 = sigma
    d2 = t1 * shape * 2.0 * (dist / t2) ** 2
    grad = np.array([
        -0.5 * n * np.sum(sinv * d) + 0.5 * np.sum(w * d) for d in (d1, d2)
    ])
    return float(val), grad


def gp_map_fit(snaps: SnapshotSet | np.ndarray, prior: LogNormalPrior | None = None,
               init: KernelParams | None = None, nugget: float = 1e-6, max_iter: int = 500,
               mean: np.ndarray | None = None) -> KernelParams:
    """MAP estimate of the kernel parameters from snapshots around their empirical mean.

    The result carries ``diagnostics`` with the objective history of accepted
    iterates. Raises :class:`OptimFailed` (holding the best iterate) when the
    gradient test ``|g| <= 1e-6 (1 + |f|)`` is not met.
    """
    x = snaps.snapshots if isinstance(snaps, SnapshotSet) else np.atleast_2d(np.asarray(snaps, dtype=float))
    if x.shape[1] < 2:
        raise OptimFailed("need at least two snapshots to fit a covariance")
    prior = prior or LogNormalPrior()
    init = init or KernelParams(1.0, 5.0)
    mu = x.mean(axis=1) if mean is None else mean
    z = x - mu[:, None]
    scatter = z @ z.T
    idx = np.arange(x.shape[0])
    dist = ring_distance(idx[:, None], idx[None, :], x.shape[0]).astype(float)
    n = x.shape[1]
    cache: dict[bytes, float] = {}

    def negpost(phi):
        try:
            ll, g = gp_log_likelihood(phi, scatter, n, dist, nugget)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(phi)
        lp, gp = prior.logpdf_and_grad(phi)
        f = -(ll + lp)
        cache[phi.tobytes()] = f
        return f, -(g + gp)

    return _run_lbfgs(negpost, np.log([init.theta1, init.theta2]), cache, max_iter,
                      lambda phi, diag: KernelParams(*np.exp(phi), diagnostics=diag))


def _run_lbfgs(fun, x0, cache, max_iter, build):
    history = []

    def callback(xk):
        f = cache.get(xk.tobytes())
        if f is None:
            f = fun(xk)[0]
        history.append(-f)

    x = np.asarray(x0, dtype=float)
    history.append(-fun(x)[0])
    nit = 0
    # restarts clear the quasi-Newton memory after a failed line search
    for _ in range(4):
        res = minimize(fun, x, jac=True, method="L-BFGS-B", callback=callback,
                       options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-10, "maxcor": 30})
        nit += int(res.nit)
        f, g = fun(res.x)
        gnorm = float(np.linalg.norm(g))
        if (np.isfinite(f) and gnorm <= 1e-6 * (1.0 + abs(f))) or np.array_equal(res.x, x):
            break
        x = res.x
    diag = {"objective": -f, "grad_norm": gnorm, "iterations": nit,
            "history": history, "message": str(res.message), "x": res.x.copy()}
    best = build(res.x, diag)
    if not np.isfinite(f) or gnorm > 1e-6 * (1.0 + abs(f)):
        raise OptimFailed(f"optimizer stopped with |grad|={gnorm:.3g} (objective {-f:.6g}): {res.message}",
                          best=best, diagnostics=diag)
    return best


def gp_basis(snaps: SnapshotSet, params: KernelParams, r: int, nugget: float = 1e-6,
             config_hash: str = "") -> SubspaceBasis:
    """Basis from the fitted kernel matrix; the offset is the snapshot mean."""
    sigma = kernel_matrix(params, snaps.distance_matrix(), nugget)
    lam, u = leading_eigenpairs(sigma, r)
    offset = snaps.snapshots.mean(axis=1)
    return build_basis(lam, u, offset, "gp", config_hash)
