"""State-space model operators consumed by the filters, with apply counters."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import DimensionMismatch
from ..gaussian import DenseCovariance, DiagonalCovariance, GaussianBelief, as_covariance
from .._fd import fd_tangent

Operator = Callable[[np.ndarray], np.ndarray]


def _ncols(v: np.ndarray) -> int:
    return 1 if v.ndim == 1 else v.shape[1]


@dataclass
class ApplyCounter:
    """Number of vectors pushed through each operator; a d x p block counts p."""

    evolve: int = 0
    tangent_evolve: int = 0
    observe: int = 0
    tangent_observe: int = 0

    @property
    def model_applies(self) -> int:
        """Forward model and tangent model applications combined."""
        return self.evolve + self.tangent_evolve

    def reset(self):
        self.evolve = self.tangent_evolve = self.observe = self.tangent_observe = 0

    def as_dict(self) -> dict:
        return {"evolve": self.evolve, "tangent_evolve": self.tangent_evolve,
                "observe": self.observe, "tangent_observe": self.tangent_observe}


def _r_matrix(r_cov) -> np.ndarray:
    r = np.asarray(r_cov, dtype=float)
    if r.ndim == 0:
        r = np.array([[float(r)]])
    elif r.ndim == 1:
        r = np.diag(r)
    return r


class LinearModelOps:
    """Linear Gaussian state-space model x_k = M x_{k-1} + E_k, y_k = H x_k + e_k.

    ``m`` and ``h`` may be matrices or callables acting on vectors and column blocks.
    """

    obs_linear = True

    def __init__(self, m, h, q, r_cov, dim: int | None = None):
        self._m = m
        self._h = h
        self.q: DiagonalCovariance | DenseCovariance = as_covariance(q)
        self.r_cov = _r_matrix(r_cov)
        self.dim = dim if dim is not None else self.q.dim
        if self.q.dim != self.dim:
            raise DimensionMismatch(f"Q has dimension {self.q.dim}, state has {self.dim}")
        if not callable(m) and np.shape(m) != (self.dim, self.dim):
            raise DimensionMismatch(f"M has shape {np.shape(m)}, expected {(self.dim, self.dim)}")
        if not callable(h):
            hs = np.shape(h)
            if len(hs) != 2 or hs[1] != self.dim or hs[0] != self.r_cov.shape[0]:
                raise DimensionMismatch(f"H has shape {hs}, R is {self.r_cov.shape}")
        self.counter = ApplyCounter()

    @property
    def obs_dim(self) -> int:
        return self.r_cov.shape[0]

    def evolve_apply(self, v: np.ndarray) -> np.ndarray:
        self.counter.evolve += _ncols(v)
        return self._m(v) if callable(self._m) else self._m @ v

    def obs_apply(self, v: np.ndarray) -> np.ndarray:
        self.counter.observe += _ncols(v)
        return self._h(v) if callable(self._h) else self._h @ v

    # Uniform interface with the nonlinear case, so the EKF code runs on linear models too.
    def evolve(self, x):
        return self.evolve_apply(x)

    def observe(self, x):
        return self.obs_apply(x)

    def tangent_evolve_at(self, x) -> Operator:
        return self.evolve_apply

    def tangent_observe_at(self, x) -> Operator:
        return self.obs_apply


class NonlinearModelOps:
    """Nonlinear model with optional tangent linear codes.

    Missing tangents default to central finite differences of the nonlinear map.
    """

    def __init__(self, evolve: Operator, observe: Operator, q, r_cov, dim: int,
                 tangent_evolve: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
                 tangent_observe: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
                 obs_matrix: np.ndarray | None = None):
        self._evolve = evolve
        self._observe = observe
        self._tev = tangent_evolve
        self._tob = tangent_observe
        self.obs_matrix = obs_matrix
        self.q = as_covariance(q)
        self.r_cov = _r_matrix(r_cov)
        self.dim = dim
        if self.q.dim != dim:
            raise DimensionMismatch(f"Q has dimension {self.q.dim}, state has {dim}")
        self.counter = ApplyCounter()

    @classmethod
    def with_linear_obs(cls, evolve, h: np.ndarray, q, r_cov, dim: int, tangent_evolve=None):
        h = np.asarray(h, dtype=float)
        return cls(evolve, lambda x: h @ x, q, r_cov, dim, tangent_evolve=tangent_evolve,
                   tangent_observe=lambda x, v: h @ v, obs_matrix=h)

    @property
    def obs_linear(self) -> bool:
        return self.obs_matrix is not None

    @property
    def obs_dim(self) -> int:
        return self.r_cov.shape[0]

    def evolve(self, x: np.ndarray) -> np.ndarray:
        self.counter.evolve += _ncols(x)
        return self._evolve(x)

    def observe(self, x: np.ndarray) -> np.ndarray:
        self.counter.observe += _ncols(x)
        return self._observe(x)

    def tangent_evolve_at(self, x: np.ndarray) -> Operator:
        def apply(v):
            self.counter.tangent_evolve += _ncols(v)
            if self._tev is None:
                return fd_tangent(self._evolve, x, v)
            return self._tev(x, v)
        return apply

    def tangent_observe_at(self, x: np.ndarray) -> Operator:
        def apply(v):
            self.counter.tangent_observe += _ncols(v)
            if self._tob is None:
                return fd_tangent(self._observe, x, v)
            return self._tob(x, v)
        return apply

    def obs_apply(self, v: np.ndarray) -> np.ndarray:
        """Linear observation operator; only defined when ``obs_matrix`` is set."""
        if self.obs_matrix is None:
            raise DimensionMismatch("model has a nonlinear observation operator")
        self.counter.tangent_observe += _ncols(v)
        return self.obs_matrix @ v


@dataclass
class FilterState:
    """Belief after step ``step_index``.

    Reduced filters hold a belief over subspace coordinates and the forecast
    mean ``prior_mean_full``; full filters hold a belief over the state itself.
    ``ensemble`` is only used by the full stochastic EnKF.
    """

    belief: GaussianBelief
    prior_mean_full: np.ndarray
    step_index: int = 0
    ensemble: np.ndarray | None = field(default=None, repr=False)

