"""Kalman, extended Kalman and ensemble filters, full and subspace-constrained."""
from .ensemble import LocalizationTaper, enkf_step, gaspari_cohn, initial_ensemble, reduced_enkf_step
from .kalman import ekf_step, initial_full_state, kalman_update, kf_step
from .ops import ApplyCounter, FilterState, LinearModelOps, NonlinearModelOps
from .reduced import (Parameterization, initial_reduced_state, reconstruct_state, reduced_ekf_step,
                      reduced_kf_step, rokf_step, static_reduced_posterior, subspace_update)

__all__ = [
    "ApplyCounter", "FilterState", "LinearModelOps", "LocalizationTaper", "NonlinearModelOps",
    "Parameterization", "ekf_step", "enkf_step", "gaspari_cohn", "initial_ensemble",
    "initial_full_state", "initial_reduced_state", "kalman_update", "kf_step", "reconstruct_state",
    "reduced_ekf_step", "reduced_enkf_step", "reduced_kf_step", "rokf_step",
    "static_reduced_posterior", "subspace_update",
]
