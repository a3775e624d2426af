"""Full-space Kalman and extended Kalman filters with dense covariances."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..errors import SolveFailed
from ..gaussian import GaussianBelief, symmetrize
from .ops import FilterState


def initial_full_state(x0: np.ndarray, c0: np.ndarray | float = 1.0) -> FilterState:
    x0 = np.asarray(x0, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    cov = c0 * np.eye(x0.shape[0]) if c0.ndim == 0 else c0
    return FilterState(GaussianBelief(x0.copy(), cov.copy()), x0.copy(), 0)


def kalman_update(xf: np.ndarray, cf: np.ndarray, h: np.ndarray, innovation: np.ndarray,
                  r_cov: np.ndarray):
    """Condition N(xf, cf) on an observation with Jacobian ``h`` and innovation y - h(xf)."""
    pht = cf @ h.T
    s = symmetrize(h @ pht + r_cov)
    try:
        cho = sla.cho_factor(s, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolveFailed("innovation covariance is not positive definite") from exc
    gain = sla.cho_solve(cho, pht.T).T
    xa = xf + gain @ innovation
    ca = symmetrize(cf - gain @ pht.T)
    return xa, ca


def ekf_step(state: FilterState, model, y: np.ndarray) -> FilterState:
    """Extended Kalman filter step; dense Jacobians come from tangent applies to unit vectors.

    With :class:`~subfilter.filters.ops.LinearModelOps` this is the standard Kalman filter.
    """
    xa_prev = state.belief.mean
    d = xa_prev.shape[0]
    m_jac = model.tangent_evolve_at(xa_prev)(np.eye(d))
    xf = model.evolve(xa_prev)
    cf = symmetrize(m_jac @ state.belief.cov @ m_jac.T + model.q.dense())
    h_jac = model.tangent_observe_at(xf)(np.eye(d))
    innovation = np.asarray(y, dtype=float) - model.observe(xf)
    xa, ca = kalman_update(xf, cf, h_jac, innovation, model.r_cov)
    return FilterState(GaussianBelief(xa, ca), xf, state.step_index + 1)


def kf_step(state: FilterState, model, y: np.ndarray) -> FilterState:
    """Standard Kalman filter predict and update for a linear model."""
    return ekf_step(state, model, y)
