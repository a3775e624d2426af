"""Lorenz (2005) model II on a periodic ring, RK4 integration and tangent linear code.

States are stored 0-based: ``x[n]`` holds the 1-based variable X_{n+1}.
All functions accept a single state of shape ``(n,)`` or a batch of column
states of shape ``(n, p)``; shifts act along axis 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._fd import fd_tangent
from ..errors import NonFiniteState, ValidationError

# Forcing used with each smoothing parameter in the reference experiments.
DEFAULT_FORCING = {1: 8.0, 5: 10.0, 9: 10.0, 17: 12.0, 33: 14.0, 65: 30.0}


@dataclass(frozen=True)
class LorenzIIConfig:
    n: int = 240
    k_smooth: int = 33
    forcing: float | np.ndarray = 14.0
    dt: float = 0.025

    def __post_init__(self):
        if self.k_smooth < 1 or self.k_smooth % 2 == 0:
            raise ValidationError(f"k_smooth must be odd and >= 1, got {self.k_smooth}")
        if self.n <= 2 * self.k_smooth:
            raise ValidationError(f"n={self.n} must exceed 2*k_smooth={2 * self.k_smooth}")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        f = np.asarray(self.forcing, dtype=float)
        if f.ndim > 1 or (f.ndim == 1 and f.shape[0] != self.n):
            raise ValidationError("forcing must be a scalar or a length-n vector")

    @property
    def half_width(self) -> int:
        return (self.k_smooth - 1) // 2

    def forcing_vector(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.forcing, dtype=float), (self.n,)).copy()


def _extend(a: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Pad periodically along axis 0 so that ``ext[lo + i]`` is ``a[i mod n]``."""
    parts = []
    if lo:
        parts.append(a[-lo:])
    parts.append(a)
    if hi:
        parts.append(a[:hi])
    return np.concatenate(parts, axis=0)


def _window_mean(x: np.ndarray, k: int) -> np.ndarray:
    """W_n = sum_{i=-J}^{J} x_{n-i} / K via a circular cumulative sum."""
    j = (k - 1) // 2
    n = x.shape[0]
    ext = _extend(x, j + 1, j)
    c = np.cumsum(ext, axis=0)
    # sum over ext[n+1 .. n+2j+1] (shifted by the lo pad of j+1)
    return (c[2 * j + 1: 2 * j + 1 + n] - c[:n]) / k


def bracket(x: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Bilinear advection term [x, y]_K of model II.

    ``bracket(x, x, K)`` is the double sum in the model's right-hand side.
    """
    n = x.shape[0]
    j = (k - 1) // 2
    wx = _window_mean(x, k)
    first = -np.roll(wx, 2 * k, axis=0) * np.roll(_window_mean(y, k), k, axis=0)
    # sum_j W_{n-K+j} y_{n+K+j} / K, j = -J..J
    lo = k + j
    hi = k + j
    wext = _extend(wx, lo, hi)
    yext = _extend(y, lo, hi)
    acc = np.zeros_like(first)
    for jj in range(-j, j + 1):
        acc += wext[lo - k + jj: lo - k + jj + n] * yext[lo + k + jj: lo + k + jj + n]
    return first + acc / k


def lorenz2_rhs(x: np.ndarray, cfg: LorenzIIConfig, forcing: np.ndarray | None = None) -> np.ndarray:
    """Time derivative of model II in O(n K)."""
    f = cfg.forcing_vector() if forcing is None else forcing
    if x.ndim == 2 and f.ndim == 1:
        f = f[:, None]
    return bracket(x, x, cfg.k_smooth) - x + f


def lorenz2_rhs_reference(x: np.ndarray, cfg: LorenzIIConfig) -> np.ndarray:
    """Literal O(n K^2) double sum, kept as an oracle for :func:`lorenz2_rhs`."""
    k = cfg.k_smooth
    j = cfg.half_width
    f = cfg.forcing_vector()
    if x.ndim == 2:
        f = f[:, None]
    s = np.zeros_like(x, dtype=float)

    # np.roll(x, m)[n] == x[n - m]
    def at(offset):
        return np.roll(x, -offset, axis=0)

    for jj in range(-j, j + 1):
        for ii in range(-j, j + 1):
            s += -at(-2 * k - ii) * at(-k - jj) + at(-k + jj - ii) * at(k + jj)
    return s / k**2 - x + f


def lorenz2_jvp(x: np.ndarray, v: np.ndarray, cfg: LorenzIIConfig) -> np.ndarray:
    """Jacobian of the right-hand side at ``x`` applied to ``v``."""
    k = cfg.k_smooth
    if x.ndim == 1 and v.ndim == 2:
        x = x[:, None]
    xb = np.broadcast_to(x, v.shape)
    return bracket(xb, v, k) + bracket(v, xb, k) - v


def rk4_step(x: np.ndarray, dt: float, rhs) -> np.ndarray:
    """One classical Runge-Kutta step of ``dx/dt = rhs(x)``."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * dt * k1)
    k3 = rhs(x + 0.5 * dt * k2)
    k4 = rhs(x + dt * k3)
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("RK4 produced non-finite state")
    return out


def rk4_tangent_step(x: np.ndarray, v: np.ndarray, dt: float, rhs, jvp):
    """Advance ``x`` one RK4 step and push ``v`` through the exact derivative of that step.

    Returns ``(x_next, v_next)``.
    """
    k1 = rhs(x)
    d1 = jvp(x, v)
    x2 = x + 0.5 * dt * k1
    k2 = rhs(x2)
    d2 = jvp(x2, v + 0.5 * dt * d1)
    x3 = x + 0.5 * dt * k2
    k3 = rhs(x3)
    d3 = jvp(x3, v + 0.5 * dt * d2)
    x4 = x + dt * k3
    k4 = rhs(x4)
    d4 = jvp(x4, v + dt * d3)
    xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    vn = v + dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
    if not (np.all(np.isfinite(xn)) and np.all(np.isfinite(vn))):
        raise NonFiniteState("tangent RK4 produced non-finite values")
    return xn, vn


def integrate(x: np.ndarray, cfg: LorenzIIConfig, n_steps: int, forcing=None) -> np.ndarray:
    rhs = lambda z: lorenz2_rhs(z, cfg, forcing)  # noqa: E731
    for _ in range(n_steps):
        x = rk4_step(x, cfg.dt, rhs)
    return x


@dataclass
class LorenzIIModel:
    """Observation-interval propagator built from ``substeps`` RK4 steps.

    ``analytic_tangent`` selects the exact RK4 tangent linear code; otherwise
    central differences are used.
    """

    cfg: LorenzIIConfig
    substeps: int = 2
    analytic_tangent: bool = True
    forcing: np.ndarray | None = field(default=None, repr=False)

    def evolve(self, x: np.ndarray) -> np.ndarray:
        return integrate(x, self.cfg, self.substeps, self.forcing)

    def tangent(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if not self.analytic_tangent:
            return fd_tangent(self.evolve, x, v)
        cfg = self.cfg
        rhs = lambda z: lorenz2_rhs(z, cfg, self.forcing)  # noqa: E731
        jvp = lambda z, w: lorenz2_jvp(z, w, cfg)  # noqa: E731
        xc = x if v.ndim == 1 else x[:, None]
        vc = v
        for _ in range(self.substeps):
            xc, vc = rk4_tangent_step(xc, vc, cfg.dt, rhs, jvp)
        return vc
