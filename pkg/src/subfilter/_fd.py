"""Central finite-difference directional derivatives."""
from __future__ import annotations

import numpy as np


def fd_tangent(evolve, x: np.ndarray, v: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference directional derivative of ``evolve`` at ``x``.

    The step is ``rel_step * (1 + |x|_inf) / max(|v|_inf, 1)`` per column.
    """
    scale = 1.0 + np.max(np.abs(x))
    if v.ndim == 1:
        eps = rel_step * scale / max(np.max(np.abs(v)), 1.0)
        return (evolve(x + eps * v) - evolve(x - eps * v)) / (2 * eps)
    vmax = np.maximum(np.max(np.abs(v), axis=0), 1.0)
    eps = rel_step * scale / vmax
    xc = x[:, None]
    return (evolve(xc + eps * v) - evolve(xc - eps * v)) / (2 * eps)
