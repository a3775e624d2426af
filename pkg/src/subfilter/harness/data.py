"""Truth trajectories, observations and snapshot runs for twin experiments."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..gaussian import make_rng
from ..models.linear import selection_matrix
from ..models.lorenz2 import LorenzIIConfig, integrate, lorenz2_rhs, rk4_step
from ..subspace.basis import SnapshotSet
from .config import ExperimentConfig


def lorenz_config(cfg: ExperimentConfig) -> LorenzIIConfig:
    return LorenzIIConfig(n=cfg.n, k_smooth=cfg.k_smooth, forcing=cfg.forcing_value, dt=cfg.dt)


def observation_matrix(cfg: ExperimentConfig) -> np.ndarray:
    return selection_matrix(cfg.n, cfg.obs_every)


@dataclass(frozen=True)
class TwinData:
    """``truth[k]`` is the true state at observation time k (k = 0 is the start);
    ``obs[k - 1]`` is the observation of ``truth[k]``."""

    truth: np.ndarray
    obs: np.ndarray
    h: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.obs.shape[0]

    def climatological_sd(self) -> float:
        return float(np.sqrt(np.mean(np.var(self.truth[1:], axis=0))))

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as fh:
            np.savez(fh, truth=self.truth, obs=self.obs, h=self.h)
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "TwinData":
        with np.load(path) as z:
            return cls(z["truth"], z["obs"], z["h"])


def _spun_up_state(lcfg: LorenzIIConfig, seed, spinup_time: float) -> np.ndarray:
    rng = make_rng(seed)
    x = lcfg.forcing_vector() + rng.standard_normal(lcfg.n)
    return integrate(x, lcfg, int(round(spinup_time / lcfg.dt)))


def generate_truth_and_obs(cfg: ExperimentConfig) -> TwinData:
    """Truth from the model with relative forcing noise, then y_k = H x_k + sigma e_k."""
    lcfg = lorenz_config(cfg)
    x = _spun_up_state(lcfg, (cfg.derived_seed("truth"), 0), cfg.spinup_time)
    rng = make_rng((cfg.derived_seed("truth"), 1))
    base = lcfg.forcing_vector()
    h = observation_matrix(cfg)

    def perturbed():
        return base * (1.0 + cfg.forcing_noise * rng.standard_normal(lcfg.n))

    forcing = perturbed()
    truth = np.empty((cfg.n_steps + 1, cfg.n))
    truth[0] = x
    for k in range(1, cfg.n_steps + 1):
        if cfg.forcing_redraw == "interval":
            forcing = perturbed()
        for _ in range(cfg.substeps):
            if cfg.forcing_redraw == "rk4_step":
                forcing = perturbed()
            x = rk4_step(x, lcfg.dt, lambda z, f=forcing: lorenz2_rhs(z, lcfg, f))
        truth[k] = x
    noise = make_rng((cfg.derived_seed("obs"), 2)).standard_normal((cfg.n_steps, h.shape[0]))
    obs = truth[1:] @ h.T + cfg.obs_sigma * noise
    return TwinData(truth, obs, h)


def generate_snapshots(cfg: ExperimentConfig, n_snaps: int | None = None, spacing: int | None = None,
                       seed: int | None = None) -> SnapshotSet:
    """Free run with unperturbed forcing, sampled every ``spacing`` observation intervals."""
    n_snaps = cfg.snapshots_count if n_snaps is None else n_snaps
    spacing = cfg.spacing if spacing is None else spacing
    if spacing < 1:
        raise ValidationError("snapshot spacing must be >= 1")
    if n_snaps < 2:
        raise ValidationError("need at least 2 snapshots")
    seed = cfg.derived_seed("snapshot") if seed is None else seed
    lcfg = lorenz_config(cfg)
    x = _spun_up_state(lcfg, (seed, 3), cfg.snapshot_spinup_time)
    out = np.empty((cfg.n, n_snaps))
    for i in range(n_snaps):
        x = integrate(x, lcfg, spacing * cfg.substeps)
        out[:, i] = x
    return SnapshotSet(out)
