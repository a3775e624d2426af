"""Experiment configuration: a flat set of keys read from TOML, with overrides and hashing."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import ValidationError
from ..models.lorenz2 import DEFAULT_FORCING

SCHEMA_VERSION = 1

FILTER_KINDS = ("kf", "ekf", "enkf", "reduced_kf", "reduced_ekf", "reduced_enkf", "rokf")
BASIS_SOURCES = ("pca", "gp", "gmrf")
PARAM_MODES = ("prior_mean_centered", "fixed_offset")
REDRAW_MODES = ("rk4_step", "interval", "run")


def _doc(text, **kw):
    return field(metadata={"doc": text}, **kw)


@dataclass
class ExperimentConfig:
    # model
    k_smooth: int = _doc("Lorenz II smoothing parameter K (odd)", default=33)
    n: int = _doc("state dimension", default=240)
    forcing: float | None = _doc("forcing F; empty uses the standard value for K", default=None)
    dt: float = _doc("RK4 time step", default=0.025)
    substeps: int = _doc("RK4 steps per observation interval", default=2)
    # observations and truth
    n_steps: int = _doc("number of assimilation steps", default=400)
    obs_every: int = _doc("observe every k-th state variable", default=10)
    obs_sigma: float = _doc("observation noise standard deviation", default=1.0)
    spinup_time: float = _doc("truth spin-up in time units", default=100.0)
    forcing_noise: float = _doc("relative forcing perturbation of the truth model", default=0.01)
    forcing_redraw: str = _doc("forcing perturbation redraw cadence: rk4_step|interval|run", default="rk4_step")
    # basis
    basis: str = _doc("basis source: pca|gp|gmrf", default="pca")
    r: int = _doc("subspace dimension", default=8)
    n_snapshots: int | None = _doc("snapshot count; empty means 1200 for pca, 32 for gp/gmrf", default=None)
    snapshot_spacing: int | None = _doc(
        "observation intervals between snapshots; empty means 1 for pca, 20 for gp/gmrf", default=None)
    snapshot_spinup_time: float = _doc("free-run spin-up before snapshots, time units", default=100.0)
    gp_theta1: float = _doc("GP variance initial guess", default=1.0)
    gp_theta2: float = _doc("GP correlation length initial guess (grid units)", default=5.0)
    gp_prior_sd: float = _doc("sd of the log-normal prior on each GP parameter (log scale)", default=3.0)
    gmrf_alpha: int = _doc("SPDE exponent", default=2)
    gmrf_gamma_rate: float = _doc("rate of the exponential prior on gamma", default=1.0)
    gmrf_tau: float = _doc("precision scale of the smoothness prior on log kappa", default=10.0)
    # filter
    filter: str = _doc("filter kind: " + "|".join(FILTER_KINDS), default="reduced_ekf")
    parameterization: str = _doc("prior_mean_centered|fixed_offset", default="prior_mean_centered")
    n_ens: int = _doc("ensemble size", default=0)
    beta: float = _doc("model error variance, Q = beta * I", default=0.1)
    loc_cutoff: float = _doc("Gaspari-Cohn cutoff c (support 2c); 0 disables localization", default=0.0)
    tangent: str = _doc("tangent linear code: analytic|fd", default="analytic")
    x0: float | None = _doc("initial state value (all components); empty uses the snapshot-run mean",
                            default=None)
    c0: float | None = _doc("initial covariance scale; empty uses the snapshot-run variance", default=None)
    # seeds
    seed: int = _doc("master seed", default=1)
    truth_seed: int | None = _doc("truth seed; empty derives from seed", default=None)
    obs_seed: int | None = _doc("observation noise seed; empty derives from seed", default=None)
    snapshot_seed: int | None = _doc("snapshot run seed; empty derives from seed", default=None)
    filter_seed: int | None = _doc("ensemble seed; empty derives from seed", default=None)
    # metrics
    metric_start: int = _doc("first step (1-based) of the RMSE average", default=100)
    metric_end: int = _doc("last step (inclusive) of the RMSE average", default=400)
    divergence_factor: float = _doc("divergence if RMSE > factor * climatological sd ...", default=3.0)
    divergence_window: int = _doc("... for this many consecutive steps", default=20)
    keep_means: bool = _doc("write full analysis means to the run record", default=False)

    def __post_init__(self):
        self.validate()

    # -- derived values ---------------------------------------------------
    @property
    def forcing_value(self) -> float:
        if self.forcing is not None:
            return float(self.forcing)
        if self.k_smooth not in DEFAULT_FORCING:
            raise ValidationError(f"no default forcing for K={self.k_smooth}; set 'forcing'")
        return DEFAULT_FORCING[self.k_smooth]

    @property
    def snapshots_count(self) -> int:
        if self.n_snapshots is not None:
            return self.n_snapshots
        return 1200 if self.basis == "pca" else 32

    @property
    def spacing(self) -> int:
        if self.snapshot_spacing is not None:
            return self.snapshot_spacing
        return 1 if self.basis == "pca" else 20

    def derived_seed(self, name: str) -> int:
        explicit = getattr(self, f"{name}_seed")
        if explicit is not None:
            return int(explicit)
        tag = {"truth": 11, "obs": 23, "snapshot": 37, "filter": 41}[name]
        return int(self.seed) * 1000 + tag

    def validate(self):
        if self.filter not in FILTER_KINDS:
            raise ValidationError(f"unknown filter {self.filter!r}")
        if self.basis not in BASIS_SOURCES:
            raise ValidationError(f"unknown basis {self.basis!r}")
        if self.parameterization not in PARAM_MODES:
            raise ValidationError(f"unknown parameterization {self.parameterization!r}")
        if self.forcing_redraw not in REDRAW_MODES:
            raise ValidationError(f"unknown forcing_redraw {self.forcing_redraw!r}")
        if self.tangent not in ("analytic", "fd"):
            raise ValidationError("tangent must be analytic or fd")
        if self.r < 1 or self.r > self.n:
            raise ValidationError(f"r={self.r} outside 1..{self.n}")
        if self.n_ens < 0:
            raise ValidationError("n_ens must be non-negative")
        if self.filter == "enkf" and self.n_ens < 2:
            raise ValidationError("enkf needs n_ens >= 2")
        if self.snapshot_spacing is not None and self.snapshot_spacing < 1:
            raise ValidationError("snapshot_spacing must be >= 1")
        if self.beta <= 0 or self.obs_sigma < 0:
            raise ValidationError("beta must be positive and obs_sigma nonnegative")
        if not 1 <= self.metric_start <= self.metric_end:
            raise ValidationError("need 1 <= metric_start <= metric_end")
        if self.n_steps < 1:
            raise ValidationError("n_steps must be positive")

    # -- hashing ----------------------------------------------------------
    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def _hash_keys(self, keys) -> str:
        payload = {k: getattr(self, k) for k in keys}
        payload["schema"] = SCHEMA_VERSION
        blob = json.dumps(payload, sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def model_keys(self):
        return ["k_smooth", "n", "forcing", "dt", "substeps"]

    def truth_hash(self) -> str:
        keys = self.model_keys() + ["n_steps", "obs_every", "obs_sigma", "spinup_time", "forcing_noise",
                                    "forcing_redraw", "truth_seed", "obs_seed", "seed"]
        return self._hash_keys(keys)

    def basis_hash(self) -> str:
        keys = self.model_keys() + ["basis", "n_snapshots", "snapshot_spacing", "snapshot_spinup_time",
                                    "snapshot_seed", "seed"]
        if self.basis == "gp":
            keys += ["gp_theta1", "gp_theta2", "gp_prior_sd"]
        if self.basis == "gmrf":
            keys += ["gmrf_alpha", "gmrf_gamma_rate", "gmrf_tau"]
        return self._hash_keys(keys)

    def config_hash(self) -> str:
        return self._hash_keys([f.name for f in fields(self)])

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def config_keys_help() -> str:
    """One line per configuration key with its default, for ``--help`` output."""
    lines = []
    for f in fields(ExperimentConfig):
        default = f.default if f.default is not dataclasses.MISSING else None
        shown = "" if default is None else repr(default)
        lines.append(f"  {f.name:<22} {f.metadata.get('doc', '')} [default: {shown or 'empty'}]")
    return "\n".join(lines)


def _coerce(name: str, raw: Any) -> Any:
    f = {x.name: x for x in fields(ExperimentConfig)}.get(name)
    if f is None:
        raise ValidationError(f"unknown config key {name!r}")
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text.lower() in ("", "none", "null"):
        return None
    typ = str(f.type)
    if typ.startswith("bool"):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValidationError(f"{name} expects a boolean, got {raw!r}")
    try:
        if typ.startswith("int"):
            return int(text)
        if typ.startswith("float"):
            return float(text)
    except ValueError as exc:
        raise ValidationError(f"{name} expects {typ}, got {raw!r}") from exc
    return text


def _flatten(data: dict[str, Any]) -> dict[str, Any]:
    """Section tables like ``[filter]`` are accepted for readability and flattened."""
    out: dict[str, Any] = {}
    for k, v in data.items():
        if isinstance(v, dict):
            for kk, vv in _flatten(v).items():
                if kk in out:
                    raise ValidationError(f"duplicate config key {kk!r}")
                out[kk] = vv
        else:
            if k in out:
                raise ValidationError(f"duplicate config key {k!r}")
            out[k] = v
    return out


def parse_overrides(pairs) -> dict[str, Any]:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValidationError(f"override {pair!r} is not key=value")
        key, value = pair.split("=", 1)
        key = key.strip().split(".")[-1]
        out[key] = _coerce(key, value)
    return out


def make_config(data: dict[str, Any] | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    merged = _flatten(data or {})
    merged.update(overrides or {})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
    merged = {k: _coerce(k, v) for k, v in merged.items()}
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ValidationError(f"config file {path} not found") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"config file {path}: {exc}") from exc
    return make_config(data, overrides)
