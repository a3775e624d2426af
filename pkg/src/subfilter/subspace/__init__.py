"""Subspace construction: PCA, stationary GP kernels and SPDE-based GMRF precisions."""
from .basis import (Energy, SnapshotSet, SubspaceBasis, build_basis, cumulative_energy,
                    empirical_covariance, leading_eigenpairs, pca_basis, ring_distance)
from .gmrf import (GmrfModel, GmrfPrior, RingMesh, basis_from_precision, gmrf_assemble_precision,
                   gmrf_map_fit, gmrf_objective)
from .gp import KernelParams, LogNormalPrior, gp_basis, gp_log_likelihood, gp_map_fit, kernel_matrix, sq_exp_kernel

__all__ = [
    "Energy", "SnapshotSet", "SubspaceBasis", "build_basis", "cumulative_energy", "empirical_covariance",
    "leading_eigenpairs", "pca_basis", "ring_distance", "GmrfModel", "GmrfPrior", "RingMesh",
    "basis_from_precision", "gmrf_assemble_precision", "gmrf_map_fit", "gmrf_objective", "KernelParams",
    "LogNormalPrior", "gp_basis", "gp_log_likelihood", "gp_map_fit", "kernel_matrix", "sq_exp_kernel",
]
