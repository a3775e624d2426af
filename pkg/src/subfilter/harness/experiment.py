"""Run one twin experiment: artifacts, filter loop, metrics and run records."""
from __future__ import annotations

import hashlib
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import DimensionMismatch, OptimFailed, SubfilterError, ValidationError
from ..filters import (FilterState, LocalizationTaper, NonlinearModelOps, ekf_step, enkf_step,
                       initial_full_state, initial_reduced_state, reconstruct_state, reduced_ekf_step,
                       reduced_enkf_step, rokf_step)
from ..gaussian import DiagonalCovariance
from ..models.lorenz2 import LorenzIIModel
from ..subspace.basis import SnapshotSet, SubspaceBasis, build_basis, empirical_covariance, leading_eigenpairs
from ..subspace.gmrf import GmrfPrior, basis_from_precision, gmrf_map_fit
from ..subspace.gp import KernelParams, LogNormalPrior, gp_basis, gp_map_fit
from .config import ExperimentConfig
from .data import TwinData, generate_snapshots, generate_truth_and_obs, lorenz_config

FULL_FILTERS = ("kf", "ekf", "enkf")
RECORD_SCHEMA = 1
SUMMARY_COLUMNS = ("filter", "basis", "r", "n_ens", "beta", "mean_rmse", "diverged", "wall_ms", "model_applies")


def rmse(estimate, truth) -> float:
    """Root mean square of the componentwise error."""
    e = np.asarray(estimate, dtype=float)
    t = np.asarray(truth, dtype=float)
    if e.shape != t.shape:
        raise DimensionMismatch(f"estimate shape {e.shape} != truth shape {t.shape}")
    return float(np.sqrt(np.mean((e - t) ** 2)))


def detect_divergence(errors: np.ndarray, threshold: float, window: int) -> bool:
    """True if ``errors`` exceed ``threshold`` for ``window`` consecutive steps or are not finite."""
    run = 0
    for e in errors:
        if not np.isfinite(e):
            return True
        run = run + 1 if e > threshold else 0
        if run >= window:
            return True
    return False


def array_hash(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a, dtype=float).tobytes()).hexdigest()[:16]


# -- artifacts -------------------------------------------------------------

_MEMO: dict[tuple, Any] = {}


def _cached(kind: str, key: str, cache_dir, make, save, load):
    memo_key = (kind, key)
    if memo_key in _MEMO:
        return _MEMO[memo_key]
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"{kind}-{key}.npz"
        if path.exists():
            obj = load(path)
            _MEMO[memo_key] = obj
            return obj
    obj = make()
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save(obj, path)
    _MEMO[memo_key] = obj
    return obj


def clear_memo() -> None:
    _MEMO.clear()


def twin_data(cfg: ExperimentConfig, cache_dir=None) -> TwinData:
    return _cached("truth", cfg.truth_hash(), cache_dir, lambda: generate_truth_and_obs(cfg),
                   lambda o, p: o.save(p), TwinData.load)


def snapshot_set(cfg: ExperimentConfig, cache_dir=None) -> SnapshotSet:
    def save(o, p):
        tmp = p.with_name(p.name + ".tmp")
        with open(tmp, "wb") as fh:
            np.savez(fh, snapshots=o.snapshots)
        tmp.replace(p)

    def load(p):
        with np.load(p) as z:
            return SnapshotSet(z["snapshots"])

    return _cached("snapshots", cfg.basis_hash(), cache_dir, lambda: generate_snapshots(cfg), save, load)


def fit_full_basis(cfg: ExperimentConfig, snaps: SnapshotSet) -> tuple[SubspaceBasis, dict]:
    """Full-rank basis for ``cfg.basis``; truncate to the working r afterwards."""
    n = snaps.dim
    info: dict[str, Any] = {"source": cfg.basis}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if cfg.basis == "pca":
            mean, cov = empirical_covariance(snaps)
            lam, u = leading_eigenpairs(cov, n)
            basis = build_basis(lam, u, mean, "pca", cfg.basis_hash())
        elif cfg.basis == "gp":
            prior = LogNormalPrior(log_sd=(cfg.gp_prior_sd, cfg.gp_prior_sd))
            try:
                params = gp_map_fit(snaps, prior, KernelParams(cfg.gp_theta1, cfg.gp_theta2))
            except OptimFailed as exc:
                if exc.best is None:
                    raise
                params = exc.best
                info["warning"] = str(exc)
            info.update(theta1=float(params.theta1), theta2=float(params.theta2))
            basis = gp_basis(snaps, params, n, config_hash=cfg.basis_hash())
        else:
            prior = GmrfPrior.default(n, cfg.gmrf_gamma_rate, cfg.gmrf_tau)
            try:
                model = gmrf_map_fit(snaps, cfg.gmrf_alpha, prior)
            except OptimFailed as exc:
                if exc.best is None:
                    raise
                model = exc.best
                info["warning"] = str(exc)
            info.update(gamma=float(model.gamma), nu_mean=float(model.nu.mean()))
            basis = basis_from_precision(model, n, snaps.snapshots.mean(axis=1), cfg.basis_hash())
    return basis, info


def full_basis(cfg: ExperimentConfig, cache_dir=None) -> SubspaceBasis:
    snaps = snapshot_set(cfg, cache_dir)
    return _cached("basis", cfg.basis_hash(), cache_dir, lambda: fit_full_basis(cfg, snaps)[0],
                   lambda o, p: o.save(p), SubspaceBasis.load)


def climatology(cfg: ExperimentConfig, cache_dir=None) -> tuple[np.ndarray, float]:
    """Mean state and average variance of the default PCA snapshot run, used for initialization."""
    pcfg = cfg.replace(basis="pca", n_snapshots=None, snapshot_spacing=None)
    snaps = snapshot_set(pcfg, cache_dir).snapshots
    return snaps.mean(axis=1), float(np.mean(np.var(snaps, axis=1, ddof=1)))


# -- records ---------------------------------------------------------------

@dataclass
class RunRecord:
    config: dict
    config_hash: str
    rmse: np.ndarray
    mean_hashes: list[str]
    truth_hash: str
    summary: dict
    means: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> str:
        steps = [{"step": k + 1, "rmse": _num(self.rmse[k]), "mean_hash": self.mean_hashes[k]}
                 for k in range(len(self.rmse))]
        if self.means is not None:
            for k, row in enumerate(steps):
                row["mean"] = [float(v) for v in self.means[k]]
        payload = {"schema": RECORD_SCHEMA, "config_hash": self.config_hash, "config": self.config,
                   "truth_hash": self.truth_hash, "summary": self.summary, "steps": steps}
        return json.dumps(payload, sort_keys=True, default=_num)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        d = json.loads(line)
        steps = d["steps"]
        means = None
        if steps and "mean" in steps[0]:
            means = np.array([s["mean"] for s in steps])
        return cls(d["config"], d["config_hash"], np.array([_unnum(s["rmse"]) for s in steps]),
                   [s["mean_hash"] for s in steps], d["truth_hash"], d["summary"], means)


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _unnum(v):
    return float("nan") if v is None else float(v)


def write_records(path, records) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    tmp.replace(path)


def read_records(path) -> list[RunRecord]:
    with open(path) as fh:
        return [RunRecord.from_json(line) for line in fh if line.strip()]


# -- the run ---------------------------------------------------------------

def build_model(cfg: ExperimentConfig, h: np.ndarray) -> NonlinearModelOps:
    """Prediction model with the unperturbed forcing, Q = beta I and R = sigma^2 I."""
    if cfg.obs_sigma <= 0:
        raise ValidationError("filtering needs obs_sigma > 0")
    lm = LorenzIIModel(lorenz_config(cfg), substeps=cfg.substeps, analytic_tangent=cfg.tangent == "analytic")
    q = DiagonalCovariance.scaled_identity(cfg.beta, cfg.n)
    r_cov = cfg.obs_sigma**2 * np.eye(h.shape[0])
    return NonlinearModelOps.with_linear_obs(lm.evolve, h, q, r_cov, cfg.n, tangent_evolve=lm.tangent)


def run_experiment(cfg: ExperimentConfig, cache_dir=None, data: TwinData | None = None,
                   basis: SubspaceBasis | None = None) -> RunRecord:
    """Run the configured filter over every observation time and summarize its error.

    Divergence and numerical breakdown are recorded, not raised: after a
    breakdown the remaining per-step errors are NaN.
    """
    data = data if data is not None else twin_data(cfg, cache_dir)
    n_steps = min(cfg.n_steps, data.n_steps)
    if cfg.metric_end > n_steps:
        raise ValidationError(f"metric_end={cfg.metric_end} beyond {n_steps} steps")
    mean0, var0 = climatology(cfg, cache_dir)
    x0 = mean0 if cfg.x0 is None else np.full(cfg.n, float(cfg.x0))
    c0 = var0 if cfg.c0 is None else float(cfg.c0)
    model = build_model(cfg, data.h)
    reduced = cfg.filter not in FULL_FILTERS
    if reduced and basis is None:
        basis = full_basis(cfg, cache_dir)
    # the covariance-projection filter is defined for the centered form only
    param = "prior_mean_centered" if cfg.filter == "rokf" else cfg.parameterization
    if reduced:
        basis = basis.truncate(cfg.r) if basis.rank > cfg.r else basis
        state = initial_reduced_state(x0, basis, param)
    else:
        state = initial_full_state(x0, c0)
    taper = LocalizationTaper(cfg.loc_cutoff, cfg.n) if cfg.loc_cutoff > 0 else None
    taper_mat = taper.matrix() if taper is not None else None
    seed = cfg.derived_seed("filter")

    def step(st: FilterState, y):
        if cfg.filter in ("kf", "ekf"):
            return ekf_step(st, model, y)
        if cfg.filter == "enkf":
            return enkf_step(st, model, y, cfg.n_ens, seed, taper_mat)
        if cfg.filter in ("reduced_kf", "reduced_ekf"):
            return reduced_ekf_step(st, model, basis, y, param)
        if cfg.filter == "reduced_enkf":
            return reduced_enkf_step(st, model, basis, y, cfg.n_ens, seed, param)
        return rokf_step(st, model, basis, y)

    errors = np.full(n_steps, np.nan)
    hashes = ["" for _ in range(n_steps)]
    means = np.full((n_steps, cfg.n), np.nan) if cfg.keep_means else None
    failure = ""
    done = 0
    t0 = time.perf_counter()
    for k in range(n_steps):
        try:
            state = step(state, data.obs[k])
            est = reconstruct_state(state, basis, param) if reduced else state.belief.mean
            if not np.all(np.isfinite(est)):
                raise ValidationError("non-finite analysis mean")
        except (SubfilterError, np.linalg.LinAlgError, FloatingPointError) as exc:
            failure = f"{type(exc).__name__} at step {k + 1}: {exc}"
            break
        errors[k] = rmse(est, data.truth[k + 1])
        hashes[k] = array_hash(est)
        if means is not None:
            means[k] = est
        done = k + 1
    wall_ms = (time.perf_counter() - t0) * 1e3

    clim_sd = data.climatological_sd()
    diverged = bool(failure) or detect_divergence(errors[:done], cfg.divergence_factor * clim_sd,
                                                  cfg.divergence_window)
    window = errors[cfg.metric_start - 1: cfg.metric_end]
    mean_rmse = float(np.mean(window)) if np.all(np.isfinite(window)) else float("nan")
    counts = model.counter.as_dict()
    summary = {
        "filter": cfg.filter,
        "basis": cfg.basis if reduced else "-",
        "r": cfg.r if reduced else cfg.n,
        "n_ens": cfg.n_ens if cfg.filter in ("enkf", "reduced_enkf") else 0,
        "beta": cfg.beta,
        "mean_rmse": mean_rmse,
        "diverged": diverged,
        "wall_ms": round(wall_ms, 3),
        "model_applies": int(model.counter.model_applies),
        "applies_per_step": model.counter.model_applies / max(done, 1),
        "counts": counts,
        "k_smooth": cfg.k_smooth,
        "parameterization": param if reduced else "-",
        "loc_cutoff": cfg.loc_cutoff,
        "seed": cfg.seed,
        "steps_completed": done,
        "climatological_sd": clim_sd,
        "failure": failure,
        "config_hash": cfg.config_hash(),
    }
    return RunRecord(cfg.as_dict(), cfg.config_hash(), errors, hashes, array_hash(data.truth), summary, means)
