"""Gaussian filters constrained to a fixed low-dimensional subspace.

Subpackages: :mod:`subfilter.models` (Lorenz II, linear systems),
:mod:`subfilter.subspace` (PCA, GP and GMRF bases), :mod:`subfilter.filters`
(full and reduced KF/EKF/EnKF) and :mod:`subfilter.harness` (twin experiments).
"""
from .errors import SubfilterError

__version__ = "0.1.0"

__all__ = ["SubfilterError", "__version__"]
