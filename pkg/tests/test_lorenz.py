import numpy as np
import pytest

from subfilter.errors import NonFiniteState, ValidationError
from subfilter.models import (LorenzIIConfig, LorenzIIModel, fd_tangent, integrate, lorenz2_jvp, lorenz2_rhs,
                              lorenz2_rhs_reference, rk4_step, tangent_evolve)


def lorenz96_rhs(x, f):
    return (np.roll(x, -1) - np.roll(x, 2)) * np.roll(x, 1) - x + f


@pytest.mark.parametrize("k", [1, 3, 5, 33])
def test_rhs_matches_literal_double_sum(k):
    cfg = LorenzIIConfig(n=120 if k < 33 else 240, k_smooth=k, forcing=10.0)
    x = np.random.default_rng(k).standard_normal((cfg.n, 3)) * 3 + 2
    np.testing.assert_allclose(lorenz2_rhs(x, cfg), lorenz2_rhs_reference(x, cfg), rtol=1e-12, atol=1e-12)


def test_k1_reduces_to_lorenz96():
    cfg = LorenzIIConfig(n=40, k_smooth=1, forcing=8.0)
    x = np.random.default_rng(0).standard_normal(40)
    np.testing.assert_allclose(lorenz2_rhs(x, cfg), lorenz96_rhs(x, 8.0), atol=1e-12)


def test_rest_state_and_equilibrium():
    cfg = LorenzIIConfig(n=80, k_smooth=5, forcing=10.0)
    # x = F everywhere: bracket of a constant is -F^2 + F^2 = 0, so dx/dt = 0
    np.testing.assert_allclose(lorenz2_rhs(np.full(80, 10.0), cfg), 0.0, atol=1e-12)


def test_jvp_matches_finite_difference():
    cfg = LorenzIIConfig(n=240, k_smooth=33, forcing=14.0)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(240) * 5
    v = rng.standard_normal(240)
    eps = 1e-6
    fd = (lorenz2_rhs(x + eps * v, cfg) - lorenz2_rhs(x - eps * v, cfg)) / (2 * eps)
    np.testing.assert_allclose(lorenz2_jvp(x, v, cfg), fd, rtol=1e-6, atol=1e-8)


def test_rk4_tangent_is_exact_derivative_of_the_step():
    cfg = LorenzIIConfig(n=240, k_smooth=33, forcing=14.0)
    model = LorenzIIModel(cfg, substeps=2)
    rng = np.random.default_rng(2)
    x = integrate(cfg.forcing_vector() + rng.standard_normal(240), cfg, 400)
    v = rng.standard_normal((240, 4))
    analytic = model.tangent(x, v)
    fd = fd_tangent(model.evolve, x, v)
    assert np.linalg.norm(analytic - fd) / np.linalg.norm(analytic) < 1e-7
    np.testing.assert_allclose(tangent_evolve(x, v, cfg, analytic=True), analytic)


def test_integration_stays_bounded_and_is_chaotic():
    cfg = LorenzIIConfig(n=240, k_smooth=33, forcing=14.0)
    x0 = cfg.forcing_vector() + np.random.default_rng(3).standard_normal(240)
    x = integrate(x0, cfg, 2000)
    assert np.all(np.isfinite(x)) and np.abs(x).max() < 50
    y = integrate(x + 1e-8, cfg, 2000)
    z = integrate(x, cfg, 2000)
    assert np.linalg.norm(y - z) > 1e-4


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning", "ignore:invalid value:RuntimeWarning")
def test_non_finite_state_raises():
    cfg = LorenzIIConfig(n=40, k_smooth=1)
    with pytest.raises(NonFiniteState):
        rk4_step(np.full(40, 1e200), 0.025, lambda z: lorenz2_rhs(z, cfg))


@pytest.mark.parametrize("kw", [dict(k_smooth=4), dict(n=60, k_smooth=33), dict(dt=0.0), dict(forcing=np.ones(3))])
def test_config_validation(kw):
    with pytest.raises(ValidationError):
        LorenzIIConfig(**kw)
