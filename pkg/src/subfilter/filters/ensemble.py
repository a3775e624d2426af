"""Reduced-dimension ensemble filter and the localized stochastic EnKF baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..errors import SolveFailed, ValidationError
from ..gaussian import (GaussianBelief, LowRankPlusEasy, cholesky_factor, make_rng,
                        sample_gaussian, symmetrize)
from ..subspace.basis import SubspaceBasis, ring_distance
from .ops import FilterState
from .reduced import _finish, _param, reconstruct_state


def gaspari_cohn(dist, c: float):
    """Gaspari-Cohn fifth-order piecewise rational correlation, support radius 2c."""
    if not c > 0:
        raise ValidationError("cutoff must be positive")
    z = np.abs(np.asarray(dist, dtype=float)) / c
    out = np.zeros_like(z)
    inner = z <= 1.0
    outer = (z > 1.0) & (z < 2.0)
    zi = z[inner]
    out[inner] = -0.25 * zi**5 + 0.5 * zi**4 + 0.625 * zi**3 - 5.0 / 3.0 * zi**2 + 1.0
    zo = z[outer]
    out[outer] = (zo**5 / 12.0 - 0.5 * zo**4 + 0.625 * zo**3 + 5.0 / 3.0 * zo**2
                  - 5.0 * zo + 4.0 - 2.0 / (3.0 * zo))
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LocalizationTaper:
    """Schur-product taper on a periodic ring of ``dim`` points."""

    cutoff: float
    dim: int

    def matrix(self) -> np.ndarray:
        idx = np.arange(self.dim)
        return gaspari_cohn(ring_distance(idx[:, None], idx[None, :], self.dim), self.cutoff)


def _require_linear_obs(model):
    if not getattr(model, "obs_linear", False):
        raise ValidationError("ensemble filters here require a linear observation operator")


def reduced_enkf_step(state: FilterState, model, basis: SubspaceBasis, y: np.ndarray,
                      n_ens: int, seed: int, param=None) -> FilterState:
    """One step of the ensemble filter in subspace coordinates.

    The forecast mean is the propagated analysis mean, not the ensemble mean, so
    anomalies are scaled by 1/sqrt(n_ens). ``n_ens = 0`` gives C^f = Q.
    """
    _require_linear_obs(model)
    if n_ens < 0:
        raise ValidationError("n_ens must be non-negative")
    xa_prev = reconstruct_state(state, basis, param)
    xf = model.evolve(xa_prev)
    if n_ens:
        a = cholesky_factor(state.belief.cov)
        alphas = sample_gaussian(state.belief.mean, a, n_ens, (seed, state.step_index))
        center = xa_prev - basis.P @ state.belief.mean
        members = model.evolve(center[:, None] + basis.P @ alphas)
        x_anom = (members - xf[:, None]) / np.sqrt(n_ens)
    else:
        x_anom = np.zeros((xf.shape[0], 0))
    cf = LowRankPlusEasy(x_anom, model.q)
    return _finish(state, model, basis, _param(param), xf, cf, y)


def initial_ensemble(state: FilterState, n_ens: int, seed: int) -> np.ndarray:
    a = cholesky_factor(state.belief.cov)
    return sample_gaussian(state.belief.mean, a, n_ens, (seed, 0, 0))


def enkf_step(state: FilterState, model, y: np.ndarray, n_ens: int, seed: int,
              taper: LocalizationTaper | np.ndarray | None = None) -> FilterState:
    """Stochastic EnKF with perturbed observations.

    The gain uses the (optionally tapered) ensemble covariance plus Q; the
    forecast mean is the ensemble mean.
    """
    _require_linear_obs(model)
    if n_ens < 2:
        raise ValidationError("EnKF needs at least 2 members")
    ens = state.ensemble
    if ens is None:
        ens = initial_ensemble(state, n_ens, seed)
    if ens.shape[1] != n_ens:
        raise ValidationError(f"state carries {ens.shape[1]} members, n_ens={n_ens}")
    ef = model.evolve(ens)
    xf = ef.mean(axis=1)
    anom = (ef - xf[:, None]) / np.sqrt(n_ens - 1)
    pf = anom @ anom.T
    if taper is not None:
        pf = pf * (taper.matrix() if isinstance(taper, LocalizationTaper) else taper)
    pf = pf + model.q.dense()
    h = model.obs_matrix
    pht = pf @ h.T
    s = symmetrize(h @ pht + model.r_cov)
    try:
        cho = sla.cho_factor(s, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolveFailed("innovation covariance is not positive definite") from exc
    rng = make_rng((seed, state.step_index + 1, 1))
    r_sqrt = np.linalg.cholesky(model.r_cov)
    perturbed = np.asarray(y, dtype=float)[:, None] + r_sqrt @ rng.standard_normal((len(y), n_ens))
    innov = perturbed - model.obs_apply(ef)
    ea = ef + pht @ sla.cho_solve(cho, innov)
    mean = ea.mean(axis=1)
    dev = ea - mean[:, None]
    cov = symmetrize(dev @ dev.T / (n_ens - 1))
    return FilterState(GaussianBelief(mean, cov), xf, state.step_index + 1, ensemble=ea)
