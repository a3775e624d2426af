"""Summary and figure tables built from run records."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

from ..subspace.basis import cumulative_energy
from .config import ExperimentConfig, make_config
from .experiment import SUMMARY_COLUMNS, RunRecord, full_basis
from .sweep import best_by

EXTRA_COLUMNS = ("k_smooth", "parameterization", "loc_cutoff", "seed", "config_hash")


def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if v != v else f"{v:.10g}"
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(buf.getvalue())
    tmp.replace(path)
    return path


def summary_rows(records: Iterable[RunRecord], timing: bool = True) -> list[list]:
    rows = []
    for rec in sorted(records, key=lambda r: r.config_hash):
        s = dict(rec.summary)
        if not timing:
            s["wall_ms"] = ""
        rows.append([s.get(c, "") for c in SUMMARY_COLUMNS + EXTRA_COLUMNS])
    return rows


def write_summary_csv(path, records: Iterable[RunRecord], timing: bool = True) -> Path:
    """One row per run. With ``timing=False`` the wall-clock column is left empty,
    which makes the file a pure function of the configurations."""
    return _write_csv(path, SUMMARY_COLUMNS + EXTRA_COLUMNS, summary_rows(records, timing))


def rmse_vs_r_rows(records: Iterable[RunRecord]) -> list[list]:
    """Best-over-beta RMSE for each (K, filter, basis, parameterization, r) of the EKF family."""
    recs = [r for r in records if r.summary["filter"] in ("ekf", "kf", "reduced_ekf", "reduced_kf", "rokf")]
    best = best_by(recs, ("k_smooth", "filter", "basis", "parameterization", "r"))
    rows = []
    for key in sorted(best, key=lambda k: tuple(str(x) for x in k[:4]) + (k[4],)):
        s = best[key].summary
        rows.append(list(key) + [s["beta"], s["mean_rmse"], s["diverged"]])
    return rows


def rmse_vs_nens_rows(records: Iterable[RunRecord]) -> list[list]:
    """Best-over-(beta, cutoff) RMSE for each (K, filter, r, n_ens) of the ensemble filters."""
    recs = [r for r in records if r.summary["filter"] in ("enkf", "reduced_enkf")]
    best = best_by(recs, ("k_smooth", "filter", "r", "n_ens"))
    rows = []
    for key in sorted(best, key=lambda k: (k[0], k[1], k[2], k[3])):
        s = best[key].summary
        rows.append(list(key) + [s["beta"], s["loc_cutoff"], s["mean_rmse"], s["diverged"]])
    return rows


def energy_rows(k_values: Iterable[int], template: ExperimentConfig | None = None, cache_dir=None,
                r_max: int | None = None) -> list[list]:
    """Cumulative energy of the PCA spectrum for each K (default snapshot run)."""
    template = template or make_config()
    rows = []
    for k in sorted(set(int(v) for v in k_values)):
        cfg = template.replace(k_smooth=k, forcing=None, basis="pca", n_snapshots=None, snapshot_spacing=None)
        lam = full_basis(cfg, cache_dir).eigenvalues
        frac = cumulative_energy(lam).fractions
        upto = len(frac) if r_max is None else min(r_max, len(frac))
        rows.extend([k, r + 1, float(frac[r])] for r in range(upto))
    return rows


def write_report(records: Sequence[RunRecord], out_dir, cache_dir=None, timing: bool = True,
                 energy_k: Iterable[int] | None = None) -> list[Path]:
    """Summary CSV plus fig2_energy.csv, fig5_rmse_vs_r.csv and fig7_rmse_vs_nens.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [write_summary_csv(out / "summary.csv", records, timing)]
    ks = energy_k if energy_k is not None else {r.summary["k_smooth"] for r in records}
    if ks:
        template = make_config({k: v for k, v in records[0].config.items()}) if records else None
        paths.append(_write_csv(out / "fig2_energy.csv", ("k_smooth", "r", "fraction"),
                                energy_rows(ks, template, cache_dir)))
    paths.append(_write_csv(out / "fig5_rmse_vs_r.csv",
                            ("k_smooth", "filter", "basis", "parameterization", "r", "beta", "mean_rmse",
                             "diverged"), rmse_vs_r_rows(records)))
    paths.append(_write_csv(out / "fig7_rmse_vs_nens.csv",
                            ("k_smooth", "filter", "r", "n_ens", "beta", "loc_cutoff", "mean_rmse", "diverged"),
                            rmse_vs_nens_rows(records)))
    return paths

