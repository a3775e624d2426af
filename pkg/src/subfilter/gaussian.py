"""Gaussian beliefs, jittered Cholesky factors, Sherman-Morrison-Woodbury solves and seeded sampling."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, FactorizationFailed, InnerSolveFailed

# Relative jitters tried in order, scaled by trace(psi)/r.
JITTER_LADDER = (0.0, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise DimensionMismatch(f"cov shape {cov.shape} does not match mean length {mean.shape[0]}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def is_valid(self, rtol: float = 1e-12) -> bool:
        """Symmetric to ``rtol`` and numerically PSD."""
        c = self.cov
        scale = max(np.max(np.abs(c)), np.finfo(float).tiny)
        if np.max(np.abs(c - c.T)) > rtol * scale:
            return False
        tr = np.trace(c)
        return bool(np.min(np.linalg.eigvalsh(symmetrize(c))) >= -1e-10 * abs(tr) / self.dim)


@dataclass(frozen=True)
class CovarianceFactor:
    """Square root ``factor`` with ``factor @ factor.T == psi + jitter * I``."""

    factor: np.ndarray
    jitter: float = 0.0

    @property
    def cov(self) -> np.ndarray:
        return self.factor @ self.factor.T


def cholesky_factor(psi: np.ndarray, ladder: Sequence[float] = JITTER_LADDER) -> CovarianceFactor:
    """Lower Cholesky factor of ``psi``, adding the smallest ladder jitter that succeeds.

    Jitters are relative to ``trace(psi) / r``.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    r = psi.shape[0]
    if psi.shape != (r, r) or r < 1:
        raise DimensionMismatch(f"psi must be square and non-empty, got {psi.shape}")
    psi = symmetrize(psi)
    scale = np.trace(psi) / r
    if not np.isfinite(scale):
        raise FactorizationFailed("psi has non-finite entries")
    if scale <= 0:
        scale = 1.0
    eye = np.eye(r)
    for rel in ladder:
        eps = rel * scale
        try:
            a = np.linalg.cholesky(psi + eps * eye)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(a)):
            return CovarianceFactor(a, eps)
    raise FactorizationFailed(f"psi is indefinite beyond maximum jitter {ladder[-1] * scale:.3g}")


class DiagonalCovariance:
    """Diagonal SPD operator with cheap apply, inverse-apply and log-determinant."""

    def __init__(self, diag):
        self.diag = np.asarray(diag, dtype=float)
        if self.diag.ndim != 1:
            raise DimensionMismatch("diagonal must be a vector")
        if np.any(self.diag <= 0):
            raise FactorizationFailed("diagonal covariance must be strictly positive")

    @classmethod
    def scaled_identity(cls, beta: float, d: int) -> "DiagonalCovariance":
        return cls(np.full(d, float(beta)))

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    def _col(self, v):
        return self.diag if v.ndim == 1 else self.diag[:, None]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._col(v) * v

    def solve(self, v: np.ndarray) -> np.ndarray:
        return v / self._col(v)

    def logdet(self) -> float:
        return float(np.sum(np.log(self.diag)))

    def dense(self) -> np.ndarray:
        return np.diag(self.diag)


class DenseCovariance:
    """Dense SPD operator backed by a Cholesky factorization."""

    def __init__(self, mat):
        self.mat = symmetrize(np.atleast_2d(np.asarray(mat, dtype=float)))
        try:
            self._cho = sla.cho_factor(self.mat, lower=True)
        except np.linalg.LinAlgError as exc:
            raise FactorizationFailed("dense covariance is not SPD") from exc

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def apply(self, v):
        return self.mat @ v

    def solve(self, v):
        return sla.cho_solve(self._cho, v)

    def logdet(self) -> float:
        return float(2 * np.sum(np.log(np.diag(self._cho[0]))))

    def dense(self):
        return self.mat


def as_covariance(q) -> DiagonalCovariance | DenseCovariance:
    """Wrap a scalar, vector (diagonal) or matrix as a covariance operator."""
    if isinstance(q, (DiagonalCovariance, DenseCovariance)):
        return q
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        return DiagonalCovariance(q)
    if q.ndim == 2:
        if np.count_nonzero(q - np.diag(np.diag(q))) == 0:
            return DiagonalCovariance(np.diag(q))
        return DenseCovariance(q)
    raise DimensionMismatch("covariance must be given as a vector or matrix")


@dataclass(frozen=True)
class LowRankPlusEasy:
    """The matrix ``B B^T + Q`` with ``Q`` an operator that is cheap to invert."""

    low_rank_factor: np.ndarray
    easy: DiagonalCovariance | DenseCovariance
    _inner: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        b = np.asarray(self.low_rank_factor, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if b.shape[0] != self.easy.dim:
            raise DimensionMismatch(f"factor has {b.shape[0]} rows, Q has dimension {self.easy.dim}")
        object.__setattr__(self, "low_rank_factor", b)

    @property
    def dim(self) -> int:
        return self.easy.dim

    @property
    def rank(self) -> int:
        return self.low_rank_factor.shape[1]

    def inner_factor(self):
        """Cholesky of the p x p matrix ``B^T Q^{-1} B + I`` and ``Q^{-1} B``, computed once."""
        if self._inner is None:
            b = self.low_rank_factor
            qib = self.easy.solve(b)
            inner = symmetrize(b.T @ qib) + np.eye(b.shape[1])
            try:
                cho = sla.cho_factor(inner, lower=True)
            except np.linalg.LinAlgError as exc:
                raise InnerSolveFailed("inner SMW system is not positive definite") from exc
            if not np.all(np.isfinite(cho[0])):
                raise InnerSolveFailed("inner SMW factor is not finite")
            object.__setattr__(self, "_inner", (cho, qib))
        return self._inner

    def apply(self, v: np.ndarray) -> np.ndarray:
        b = self.low_rank_factor
        return b @ (b.T @ v) + self.easy.apply(v)

    def dense(self) -> np.ndarray:
        b = self.low_rank_factor
        return b @ b.T + self.easy.dense()

    def logdet(self) -> float:
        """log|B B^T + Q| by the matrix determinant lemma."""
        cho, _ = self.inner_factor() if self.rank else (None, None)
        inner = 0.0 if cho is None else 2 * np.sum(np.log(np.diag(cho[0])))
        return float(self.easy.logdet() + inner)


def smw_apply(cov: LowRankPlusEasy, v: np.ndarray) -> np.ndarray:
    """``(B B^T + Q)^{-1} v`` via the Sherman-Morrison-Woodbury identity.

    ``v`` may be a vector or a matrix of columns; the p x p inner system is
    factorized once per ``cov`` regardless of the number of columns.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != cov.dim:
        raise DimensionMismatch(f"vector length {v.shape[0]} != {cov.dim}")
    qiv = cov.easy.solve(v)
    if cov.rank == 0:
        return qiv
    cho, qib = cov.inner_factor()
    return qiv - qib @ sla.cho_solve(cho, cov.low_rank_factor.T @ qiv)


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``seed`` (an int or a tuple of ints)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample_gaussian(mean: np.ndarray, factor: CovarianceFactor | np.ndarray, n: int,
                    seed: int | Sequence[int]) -> np.ndarray:
    """``n`` draws ``mean + A z`` as the columns of an ``r x n`` matrix."""
    if n < 0:
        raise ValueError("n must be non-negative")
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    a = factor.factor if isinstance(factor, CovarianceFactor) else np.atleast_2d(factor)
    z = make_rng(seed).standard_normal((a.shape[1], n))
    return mean[:, None] + a @ z
