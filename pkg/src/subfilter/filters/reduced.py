"""Filters constrained to a fixed subspace x = center + P alpha.

The forecast covariance ``C = B B^T + Q`` is never formed; its inverse is
applied to the basis columns through the Woodbury identity, so each step
costs r tangent-model applies and r x r solves.
"""
from __future__ import annotations

import enum
from typing import Callable

import numpy as np
import scipy.linalg as sla

from ..errors import DimensionMismatch, FactorizationFailed, SolveFailed
from ..gaussian import GaussianBelief, LowRankPlusEasy, cholesky_factor, smw_apply, symmetrize
from ..subspace.basis import SubspaceBasis
from .ops import FilterState


class Parameterization(str, enum.Enum):
    PRIOR_MEAN_CENTERED = "prior_mean_centered"
    FIXED_OFFSET = "fixed_offset"


def _param(param) -> Parameterization:
    return Parameterization(param) if param is not None else Parameterization.PRIOR_MEAN_CENTERED


def reconstruct_state(state: FilterState, basis: SubspaceBasis, param=None) -> np.ndarray:
    center = basis.offset if _param(param) is Parameterization.FIXED_OFFSET else state.prior_mean_full
    return center + basis.P @ state.belief.mean


def initial_reduced_state(x0: np.ndarray, basis: SubspaceBasis, param=None) -> FilterState:
    """alpha = 0 and Psi = I around ``x0``.

    In fixed-offset mode alpha starts at the least-squares coordinates of ``x0 - offset``
    so that the initial estimate is the closest representable state to ``x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    r = basis.rank
    alpha = np.zeros(r)
    if _param(param) is Parameterization.FIXED_OFFSET:
        alpha = np.linalg.lstsq(basis.P, x0 - basis.offset, rcond=None)[0]
    return FilterState(GaussianBelief(alpha, np.eye(r)), x0.copy(), 0)


def _invert_spd(info: np.ndarray) -> np.ndarray:
    """Inverse of an r x r information matrix, jittered if it is singular."""
    try:
        a = cholesky_factor(info).factor
    except FactorizationFailed as exc:
        raise SolveFailed("posterior information matrix is not positive definite") from exc
    ainv = sla.solve_triangular(a, np.eye(a.shape[0]), lower=True)
    return symmetrize(ainv.T @ ainv)


class _RCho:
    def __init__(self, r_cov):
        try:
            self.cho = sla.cho_factor(r_cov, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SolveFailed("observation covariance is not positive definite") from exc

    def solve(self, v):
        return sla.cho_solve(self.cho, v)


def subspace_update(p: np.ndarray, prior_precision_p: np.ndarray | None, hp: np.ndarray,
                    residual: np.ndarray, r_cov: np.ndarray, prior_shift: np.ndarray | None = None,
                    prior_cov: np.ndarray | None = None):
    """Posterior (alpha, Psi) for alpha with data ``residual ~ N(HP alpha, R)``.

    The prior on alpha has precision ``P^T prior_precision_p`` (i.e. ``P^T C^{-1} P``)
    or, when ``prior_cov`` is given, covariance ``prior_cov``. ``prior_shift`` adds
    ``P^T C^{-1} (x^f - center)`` for a prior not centered at zero.
    """
    rc = _RCho(r_cov)
    rinv_hp = rc.solve(hp)
    data_info = symmetrize(hp.T @ rinv_hp)
    if prior_cov is not None:
        prior_info = _invert_spd(prior_cov)
    else:
        prior_info = symmetrize(p.T @ prior_precision_p)
    psi = _invert_spd(data_info + prior_info)
    rhs = rinv_hp.T @ residual
    if prior_shift is not None:
        rhs = rhs + prior_shift
    alpha = psi @ rhs
    return alpha, psi


def _forecast(state: FilterState, model, basis: SubspaceBasis, param):
    """Steps (i)-(iii): forecast mean, factor A of Psi and B = M P A."""
    xa_prev = reconstruct_state(state, basis, param)
    a = cholesky_factor(state.belief.cov).factor
    m_tan = model.tangent_evolve_at(xa_prev)
    b = m_tan(basis.P @ a)
    xf = model.evolve(xa_prev)
    return xf, b


def _finish(state, model, basis, param, xf, cf: LowRankPlusEasy, y, *, marginal=False):
    """Steps (iv)-(v) given the forecast mean and the low-rank-plus-Q forecast covariance."""
    param = _param(param)
    p = basis.P
    y = np.asarray(y, dtype=float)
    if y.shape[0] != model.obs_dim:
        raise DimensionMismatch(f"observation has length {y.shape[0]}, model expects {model.obs_dim}")
    h_tan = model.tangent_observe_at(xf)
    hp = h_tan(p)
    residual = y - model.observe(xf)
    shift = None
    delta = None
    if param is Parameterization.FIXED_OFFSET:
        delta = xf - basis.offset
        residual = residual + h_tan(delta)
    if marginal:
        # marginal covariance of the coordinates P^+ x; equals P^T C P for orthonormal P
        w = np.linalg.pinv(p)
        wb = w @ cf.low_rank_factor
        prior_cov = symmetrize(wb @ wb.T + w @ cf.easy.apply(w.T))
        if delta is not None:
            raise DimensionMismatch("covariance-projection filter supports only the centered parameterization")
        alpha, psi = subspace_update(p, None, hp, residual, model.r_cov, prior_cov=prior_cov)
    else:
        cinv = smw_apply(cf, p if delta is None else np.column_stack([p, delta]))
        cinv_p = cinv[:, : basis.rank]
        if delta is not None:
            shift = p.T @ cinv[:, -1]
        alpha, psi = subspace_update(p, cinv_p, hp, residual, model.r_cov, prior_shift=shift)
    return FilterState(GaussianBelief(alpha, psi), xf, state.step_index + 1)


def reduced_ekf_step(state: FilterState, model, basis: SubspaceBasis, y: np.ndarray,
                     param=None) -> FilterState:
    """One reduced-dimension (extended) Kalman filter step.

    The mean is propagated with ``model.evolve``; the covariance with r tangent
    applies at the previous analysis, and ``H P`` with r tangent-observation applies
    at the forecast mean.
    """
    xf, b = _forecast(state, model, basis, param)
    cf = LowRankPlusEasy(b, model.q)
    return _finish(state, model, basis, param, xf, cf, y)


def reduced_kf_step(state: FilterState, model, basis: SubspaceBasis, y: np.ndarray,
                    param=None) -> FilterState:
    return reduced_ekf_step(state, model, basis, y, param)


def rokf_step(state: FilterState, model, basis: SubspaceBasis, y: np.ndarray) -> FilterState:
    """Reduced-order Kalman filter: the alpha prior is the projected forecast covariance.

    For orthonormal P this is ``P^T C P``; in general the pseudo-inverse ``P^+`` takes
    the place of ``P^T`` so the prior is the marginal of the coordinates of x.
    """
    xf, b = _forecast(state, model, basis, None)
    cf = LowRankPlusEasy(b, model.q)
    return _finish(state, model, basis, None, xf, cf, y, marginal=True)


def static_reduced_posterior(f: np.ndarray | Callable, r_cov: np.ndarray, mu: np.ndarray,
                             basis: SubspaceBasis, y: np.ndarray) -> GaussianBelief:
    """Posterior over alpha for y = F(mu + P alpha) + e with whitened prior alpha ~ N(0, I)."""
    apply = f if callable(f) else (lambda v: np.asarray(f) @ v)
    fp = apply(basis.P)
    r = basis.rank
    resid = np.asarray(y, dtype=float) - apply(np.asarray(mu, dtype=float))
    alpha, psi = subspace_update(basis.P, None, fp, resid, np.atleast_2d(r_cov), prior_cov=np.eye(r))
    return GaussianBelief(alpha, psi)
