import json
import subprocess
import sys

import numpy as np
import pytest

from subfilter.cli import main
from subfilter.harness import read_records
from subfilter.subspace import SnapshotSet, SubspaceBasis

SMALL = ["-o", "k_smooth=1", "-o", "n=40", "-o", "forcing=8", "-o", "n_steps=30", "-o", "metric_start=5",
         "-o", "metric_end=30", "-o", "spinup_time=2", "-o", "snapshot_spinup_time=2", "-o", "n_snapshots=50",
         "-o", "obs_every=2", "-o", "r=4"]


def run(args, tmp_path):
    return main(list(args) + ["--out", str(tmp_path)])


def test_version(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.startswith("subfilter 0.1.0 (config schema 1, record schema 1)")


def test_help_lists_config_keys(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for key in ("k_smooth", "beta", "loc_cutoff", "forcing_redraw", "gmrf_alpha"):
        assert key in out


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert run(["run", "-o", "no_such_key=1"], tmp_path) == 1
    assert run(["run", "-o", "beta=abc"], tmp_path) == 1
    assert run(["run", "--config", str(tmp_path / "missing.toml")], tmp_path) == 1
    assert run(["sweep"] + SMALL, tmp_path) == 1
    assert "ERROR(" in capsys.readouterr().err


def test_runtime_failure_exits_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["rokf-demo", "--trials", "3", "--out", str(blocker / "sub")]) == 2


def test_artifact_verbs(tmp_path):
    assert run(["snapshots"] + SMALL, tmp_path) == 0
    snaps = SnapshotSet.load_csv(tmp_path / "snapshots.csv")
    assert (snaps.dim, snaps.count) == (40, 50)
    assert run(["fit-basis"] + SMALL, tmp_path) == 0
    assert SubspaceBasis.load(tmp_path / "basis.npz").rank == 4
    assert json.loads((tmp_path / "basis_fit.json").read_text())["source"] == "pca"
    assert run(["gen-data"] + SMALL, tmp_path) == 0
    with np.load(tmp_path / "twin.npz") as z:
        assert z["obs"].shape == (30, 20) and z["truth"].shape == (31, 40)


def test_run_sweep_report(tmp_path):
    assert run(["run", "--seed", "3"] + SMALL, tmp_path) == 0
    (rec,) = read_records(tmp_path / "run.jsonl")
    assert rec.config["seed"] == 3
    assert run(["sweep", "-g", "beta=0.1,0.3", "-g", "filter=reduced_ekf,rokf", "-j", "1"] + SMALL, tmp_path) == 0
    assert len(read_records(tmp_path / "sweep.jsonl")) == 4
    out = tmp_path / "rep"
    assert main(["report", str(tmp_path / "sweep.jsonl"), "--no-timing", "--out", str(out),
                 "--cache", str(tmp_path / "cache")]) == 0
    assert (out / "summary.csv").read_text().count("\n") == 5


def test_rokf_demo_verb(tmp_path, capsys):
    assert main(["rokf-demo", "--trials", "50", "--seed", "1", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("PASS")
    rec = json.loads((tmp_path / "rokf_demo.json").read_text())
    assert len(rec["trials"]) == 50


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "subfilter.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "subfilter" in proc.stdout
