"""Twin-experiment harness for the Lorenz II model."""
from .config import (FILTER_KINDS, SCHEMA_VERSION, ExperimentConfig, config_keys_help, load_config,
                     make_config, parse_overrides)
from .data import TwinData, generate_snapshots, generate_truth_and_obs, observation_matrix
from .experiment import (RunRecord, detect_divergence, full_basis, read_records, rmse, run_experiment,
                         twin_data, write_records)
from .report import write_report, write_summary_csv
from .rokf import DemoRecord, demo_trial, loewner_gap, projection_variances, rokf_demo
from .sweep import best_by, expand_grid, grid_search

__all__ = [
    "FILTER_KINDS", "SCHEMA_VERSION", "ExperimentConfig", "config_keys_help", "load_config", "make_config",
    "parse_overrides", "TwinData", "generate_snapshots", "generate_truth_and_obs", "observation_matrix",
    "RunRecord", "detect_divergence", "full_basis", "read_records", "rmse", "run_experiment", "twin_data",
    "write_records", "write_report", "write_summary_csv", "DemoRecord", "demo_trial", "loewner_gap",
    "projection_variances", "rokf_demo", "best_by", "expand_grid", "grid_search",
]
