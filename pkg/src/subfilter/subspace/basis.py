"""Snapshot sets, eigen-scaled reduction bases and their PCA construction."""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, EigDecompFailed, ValidationError

log = logging.getLogger(__name__)

SOURCES = ("pca", "gp", "gmrf")


def ring_distance(i, j, d: int):
    """Periodic grid distance min(|i - j|, d - |i - j|)."""
    a = np.abs(np.asarray(i) - np.asarray(j)) % d
    return np.minimum(a, d - a)


@dataclass(frozen=True)
class SnapshotSet:
    """Columns of ``snapshots`` are model states on a periodic ring of ``dim`` nodes."""

    snapshots: np.ndarray
    mesh: str = "ring"

    def __post_init__(self):
        x = np.asarray(self.snapshots, dtype=float)
        if x.ndim != 2:
            raise DimensionMismatch("snapshots must be a d x N matrix")
        if x.shape[1] < 2:
            raise ValidationError(f"need at least 2 snapshots, got {x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("snapshots contain non-finite values")
        if self.mesh != "ring":
            raise ValidationError(f"unsupported mesh {self.mesh!r}")
        object.__setattr__(self, "snapshots", x)

    @property
    def dim(self) -> int:
        return self.snapshots.shape[0]

    @property
    def count(self) -> int:
        return self.snapshots.shape[1]

    def distance_matrix(self) -> np.ndarray:
        idx = np.arange(self.dim)
        return ring_distance(idx[:, None], idx[None, :], self.dim).astype(float)

    def save_csv(self, path: str | Path) -> None:
        """One snapshot per record after a ``dim=<d>, n=<N>, mesh=ring`` header line."""
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w") as fh:
            fh.write(f"dim={self.dim}, n={self.count}, mesh={self.mesh}\n")
            np.savetxt(fh, self.snapshots.T, delimiter=",", fmt="%.17g")
        tmp.replace(path)

    @classmethod
    def load_csv(cls, path: str | Path) -> "SnapshotSet":
        with open(path) as fh:
            header = fh.readline().strip()
            meta = dict(part.strip().split("=", 1) for part in header.split(","))
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        try:
            d, n = int(meta["dim"]), int(meta["n"])
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"bad snapshot header {header!r}") from exc
        if data.shape != (n, d):
            raise ValidationError(f"header says {n} snapshots of dim {d}, file holds {data.shape}")
        return cls(data.T, mesh=meta.get("mesh", "ring"))


@dataclass(frozen=True)
class SubspaceBasis:
    """Reduction operator ``P`` whose column j is ``sqrt(eigenvalues[j]) * u_j``."""

    P: np.ndarray
    eigenvalues: np.ndarray
    source: str
    offset: np.ndarray
    config_hash: str = ""
    zero_columns: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValidationError(f"unknown basis source {self.source!r}")
        if self.P.shape[1] != self.eigenvalues.shape[0] or self.offset.shape[0] != self.P.shape[0]:
            raise DimensionMismatch("basis, eigenvalues and offset disagree in size")

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    @property
    def rank(self) -> int:
        return self.P.shape[1]

    def truncate(self, r: int) -> "SubspaceBasis":
        if not 1 <= r <= self.rank:
            raise ValidationError(f"r={r} outside 1..{self.rank}")
        lam = self.eigenvalues[:r]
        return SubspaceBasis(self.P[:, :r].copy(), lam.copy(), self.source, self.offset,
                             self.config_hash, int(np.sum(lam == 0)))

    def save(self, path: str | Path) -> None:
        path = Path(path)
        meta = {"source": self.source, "config_hash": self.config_hash,
                "dim": self.dim, "rank": self.rank, "format": "subfilter-basis/1"}
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as fh:
            np.savez(fh, P=self.P, eigenvalues=self.eigenvalues, offset=self.offset,
                     meta=np.array(json.dumps(meta, sort_keys=True)))
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "SubspaceBasis":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            lam = z["eigenvalues"]
            return cls(z["P"], lam, meta["source"], z["offset"], meta.get("config_hash", ""),
                       int(np.sum(lam == 0)))


def empirical_covariance(snaps: SnapshotSet):
    """Sample mean and the N-1 normalized sample covariance of the snapshots."""
    x = snaps.snapshots
    mean = x.mean(axis=1)
    z = x - mean[:, None]
    cov = z @ z.T / (x.shape[1] - 1)
    return mean, 0.5 * (cov + cov.T)


def _fix_signs(u: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def leading_eigenpairs(cov: np.ndarray, r: int):
    """The ``r`` largest eigenpairs of a symmetric matrix, eigenvalues clamped at zero.

    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    cov = np.asarray(cov, dtype=float)
    d = cov.shape[0]
    if cov.shape != (d, d):
        raise DimensionMismatch("covariance must be square")
    if not 1 <= r <= d:
        raise ValidationError(f"r={r} outside 1..{d}")
    try:
        lam, u = np.linalg.eigh(0.5 * (cov + cov.T))
    except np.linalg.LinAlgError as exc:
        raise EigDecompFailed(str(exc)) from exc
    order = np.argsort(lam)[::-1][:r]
    lam = np.clip(lam[order], 0.0, None)
    return lam, _fix_signs(u[:, order])


def build_basis(lam: np.ndarray, u: np.ndarray, offset: np.ndarray, source: str = "pca",
                config_hash: str = "") -> SubspaceBasis:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(np.diff(lam) > 0):
        raise ValidationError("eigenvalues must be nonnegative and descending")
    zero = int(np.sum(lam == 0))
    if zero:
        warnings.warn(f"{zero} zero eigenvalue(s): basis has all-zero columns", RuntimeWarning, stacklevel=2)
    return SubspaceBasis(u * np.sqrt(lam)[None, :], lam, source, np.asarray(offset, dtype=float),
                         config_hash, zero)


@dataclass(frozen=True)
class Energy:
    fractions: np.ndarray
    degenerate: bool = False


def cumulative_energy(lam_full: np.ndarray) -> Energy:
    """Fraction of the total variance captured by the leading r eigenvalues, for every r."""
    lam = np.asarray(lam_full, dtype=float)
    total = lam.sum()
    if total <= 0:
        return Energy(np.ones_like(lam), degenerate=True)
    frac = np.cumsum(lam) / total
    frac[-1] = 1.0
    return Energy(np.minimum(frac, 1.0))


def pca_basis(snaps: SnapshotSet, r: int, config_hash: str = "") -> SubspaceBasis:
    mean, cov = empirical_covariance(snaps)
    lam, u = leading_eigenpairs(cov, r)
    return build_basis(lam, u, mean, "pca", config_hash)
