"""Cartesian parameter sweeps over experiment configurations."""
from __future__ import annotations

import itertools
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Iterable, Mapping

from ..errors import ValidationError
from .config import ExperimentConfig
from .experiment import FULL_FILTERS, RunRecord, climatology, full_basis, run_experiment, twin_data


def expand_grid(template: ExperimentConfig, grid: Mapping[str, Iterable[Any]]) -> list[ExperimentConfig]:
    """All configurations obtained by overriding ``template`` with one value per grid key."""
    keys = list(grid)
    values = [list(grid[k]) for k in keys]
    if any(not v for v in values):
        raise ValidationError("every grid axis needs at least one value")
    return [template.replace(**dict(zip(keys, combo))) for combo in itertools.product(*values)]


def prepare_artifacts(cfgs: Iterable[ExperimentConfig], cache_dir) -> None:
    """Generate the shared truth, snapshot and basis files once, before cells run in parallel."""
    seen: set[tuple[str, str]] = set()
    for cfg in cfgs:
        key = ("truth", cfg.truth_hash())
        if key not in seen:
            seen.add(key)
            twin_data(cfg, cache_dir)
            climatology(cfg, cache_dir)
        if cfg.filter not in FULL_FILTERS:
            key = ("basis", cfg.basis_hash())
            if key not in seen:
                seen.add(key)
                full_basis(cfg, cache_dir)


def _run_cell(args) -> RunRecord:
    cfg, cache_dir = args
    return run_experiment(cfg, cache_dir)


def grid_search(template: ExperimentConfig, grid: Mapping[str, Iterable[Any]], jobs: int = 1,
                cache_dir=None) -> list[RunRecord]:
    """Run every grid cell and return the records sorted by config hash.

    Cells run in ``jobs`` worker processes; artifacts are shared through
    ``cache_dir`` (a temporary directory when parallel and none is given).
    """
    cfgs = expand_grid(template, grid)
    jobs = max(1, int(jobs or 1))
    tmp = None
    if jobs > 1 and cache_dir is None:
        tmp = tempfile.TemporaryDirectory(prefix="subfilter-")
        cache_dir = tmp.name
    try:
        prepare_artifacts(cfgs, cache_dir)
        if jobs == 1 or len(cfgs) == 1:
            records = [run_experiment(c, cache_dir) for c in cfgs]
        else:
            with ProcessPoolExecutor(max_workers=min(jobs, len(cfgs))) as pool:
                records = list(pool.map(_run_cell, [(c, cache_dir) for c in cfgs]))
    finally:
        if tmp is not None:
            tmp.cleanup()
    return sorted(records, key=lambda r: r.config_hash)


def default_jobs() -> int:
    return os.cpu_count() or 1


def best_by(records: Iterable[RunRecord], keys: tuple[str, ...]) -> dict[tuple, RunRecord]:
    """For each combination of summary ``keys``, the record with the lowest finite mean RMSE.

    Groups where every run failed keep their first record.
    """
    out: dict[tuple, RunRecord] = {}
    for rec in records:
        k = tuple(rec.summary[key] for key in keys)
        cur = out.get(k)
        if cur is None or _score(rec) < _score(cur):
            out[k] = rec
    return out


def _score(rec: RunRecord) -> float:
    v = rec.summary["mean_rmse"]
    return float("inf") if v is None or v != v else float(v)
