"""Linear Gaussian test systems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from ..filters.ops import LinearModelOps


@dataclass(frozen=True)
class LinearSSMConfig:
    m_matrix: np.ndarray
    h_matrix: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        d = np.shape(self.m_matrix)[0]
        if np.shape(self.m_matrix) != (d, d):
            raise DimensionMismatch("M must be square")
        hm = np.shape(self.h_matrix)
        if len(hm) != 2 or hm[1] != d:
            raise DimensionMismatch(f"H has shape {hm}, expected (m, {d})")
        qs = np.shape(self.q)
        if qs not in ((d,), (d, d)):
            raise DimensionMismatch(f"Q has shape {qs}")
        rs = np.shape(self.r)
        if rs not in ((hm[0],), (hm[0], hm[0])):
            raise DimensionMismatch(f"R has shape {rs}")


def linear_ssm_ops(cfg: LinearSSMConfig) -> LinearModelOps:
    return LinearModelOps(np.asarray(cfg.m_matrix, float), np.asarray(cfg.h_matrix, float),
                          cfg.q, cfg.r)


def selection_matrix(d: int, every: int = 10, start: int = 0) -> np.ndarray:
    """Rows pick components start, start+every, ... of a length-d state."""
    idx = np.arange(start, d, every)
    h = np.zeros((idx.size, d))
    h[np.arange(idx.size), idx] = 1.0
    return h


def random_demo_system(seed: int, d: int = 2, q_scale: float = 0.1) -> LinearSSMConfig:
    """d x d dynamics with N(0, 1) entries, observing the first coordinate."""
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((d, d))
    h = np.zeros((1, d))
    h[0, 0] = 1.0
    return LinearSSMConfig(m, h, q_scale * np.ones(d), np.ones(1))
