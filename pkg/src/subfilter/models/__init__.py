"""Test dynamical systems: linear Gaussian models and Lorenz model II."""
from .linear import LinearSSMConfig, linear_ssm_ops, random_demo_system, selection_matrix
from .lorenz2 import (DEFAULT_FORCING, LorenzIIConfig, LorenzIIModel, fd_tangent, integrate,
                      lorenz2_jvp, lorenz2_rhs, lorenz2_rhs_reference, rk4_step, rk4_tangent_step)


def tangent_evolve(x_lin, v, cfg: LorenzIIConfig, substeps: int = 2, analytic: bool = False):
    """Model-II propagator derivative at ``x_lin`` applied to ``v``.

    Central differences by default; ``analytic=True`` uses the RK4 tangent linear code.
    """
    return LorenzIIModel(cfg, substeps, analytic_tangent=analytic).tangent(x_lin, v)


__all__ = [
    "DEFAULT_FORCING", "LinearSSMConfig", "LorenzIIConfig", "LorenzIIModel", "fd_tangent",
    "integrate", "linear_ssm_ops", "lorenz2_jvp", "lorenz2_rhs", "lorenz2_rhs_reference",
    "random_demo_system", "rk4_step", "rk4_tangent_step", "selection_matrix", "tangent_evolve",
]
