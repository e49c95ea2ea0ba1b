# tests/test_stepper.py
import numpy as np
import pytest

from tests.conftest import combined_config, scalar_config
from src.discretize.stencil import assemble_diffusion
from src.evolve.stepper import (dense_generator, frozen_monodromies, growth_bound, growth_bounds, monodromy,
                                step_linear, trajectory)
from src.model.model import build_model
from src.spectral.eigen import principal_eigenvalue
from src.types import ConfigError
from src.types.index import BoundaryKind, Setting


def test_constant_scalar_period_map_is_exact():
    model = build_model(combined_config([["0.5"]], n_x=4, n_t=50))
    mono = monodromy(model, setting=Setting.AVERAGED)
    dt = model.tgrid.dt
    assert mono.dense()[0, 0] == pytest.approx((1 - 0.5 * dt) ** -50, rel=1e-12)
    assert growth_bound(mono) == pytest.approx(-50 * np.log(1 - 0.5 * dt), rel=1e-10)


def test_spatially_constant_pde_matches_ode():
    model = build_model(combined_config([["0.3 + sin(2*pi*t/T)"]], n_x=8, n_t=40))
    pde = growth_bound(monodromy(model, setting=Setting.PDE))
    ode = growth_bound(monodromy(model, setting=Setting.AVERAGED))
    assert pde == pytest.approx(ode, rel=1e-9)


def test_step_linear_matches_dense_solve():
    model = build_model(scalar_config(beta="1 + x + cos(2*pi*t/T)", n_x=6, n_t=20, a=["1 + x"]))
    rng = np.random.default_rng(0)
    u = rng.uniform(size=model.domain.n_nodes)
    A = dense_generator(model, 4)
    expected = np.linalg.solve(np.eye(len(u)) - model.tgrid.dt * A, u)
    assert np.allclose(step_linear(u, 3, model), expected, rtol=1e-12)


def test_dense_generator_is_kappa_l_plus_reaction():
    model = build_model(scalar_config(beta="2 + x", kappa=0.7, n_x=6, n_t=20))
    A = dense_generator(model, 0)
    L = assemble_diffusion(model, 0, 0).to_dense()
    expected = 0.7 * L + np.diag(-1.0 + 2.0 + model.domain.nodes)
    assert np.allclose(A, expected)


def test_dirichlet_generator_uses_interior_nodes():
    model = build_model(scalar_config(kind="dirichlet", n_x=6, n_t=20))
    assert dense_generator(model, 0).shape == (6, 6)
    mono = monodromy(model)
    assert mono.matrix.shape == (6, 6)
    assert mono.bc is BoundaryKind.DIRICHLET


def test_period_map_is_positive_and_refines_for_small_mu():
    model = build_model(scalar_config(n_x=6, n_t=50))
    mono = monodromy(model, mu=1e-4)
    assert np.all(mono.matrix >= 0)
    assert mono.max_substeps > 1
    # growth of order exp(2e4) is carried in the log scale
    assert mono.log_scale > 100
    assert np.isfinite(growth_bound(mono))


def test_frozen_batch_matches_single_node():
    model = build_model(scalar_config(beta="1 + x + 0.5*sin(2*pi*t/T)", n_x=6, n_t=40))
    mats, logs, _ = frozen_monodromies(model)
    omegas = growth_bounds(mats, logs, model.tgrid.period)
    for j in (0, 3, 7):
        single = monodromy(model, setting=Setting.FROZEN_X, x_index=j)
        assert omegas[j] == pytest.approx(growth_bound(single), rel=1e-10)
    # omega of the frozen scalar system is mean(beta) - 1 = x to first order in dt
    assert np.allclose(omegas, model.domain.nodes, atol=0.05)


def test_frozen_x_requires_index():
    model = build_model(scalar_config(n_x=4, n_t=20))
    with pytest.raises(ValueError):
        monodromy(model, setting=Setting.FROZEN_X)


def test_robin_override_needs_b():
    model = build_model(scalar_config(n_x=4, n_t=20))
    with pytest.raises(ConfigError):
        monodromy(model, bc="robin")


def test_trajectory_starts_at_initial_state():
    model = build_model(scalar_config(n_x=4, n_t=20))
    v0 = np.ones(model.domain.n_nodes)
    states, logs = trajectory(model, v0)
    assert states.shape == (20, model.domain.n_nodes)
    assert np.allclose(states[0], v0)
    assert logs[0] == 0.0


def test_dirichlet_eigenvalue_matches_discrete_formula():
    model = build_model(combined_config([["0"]], kind="dirichlet", n_x=15, n_t=40))
    h, dt = model.domain.h, model.tgrid.dt
    mu_h = 4.0 / h ** 2 * np.sin(np.pi * h / 2) ** 2
    lam = principal_eigenvalue(model).lambda_star
    assert lam == pytest.approx(np.log(1 + dt * mu_h) / dt, rel=1e-8)


def test_time_discretization_is_first_order():
    errors = []
    for n_t in (100, 200, 400):
        model = build_model(combined_config([["0.5 + sin(2*pi*t/T)"]], n_x=4, n_t=n_t))
        errors.append(abs(growth_bound(monodromy(model, setting=Setting.AVERAGED)) - 0.5))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= 0.8)


def test_space_discretization_is_second_order():
    lams = []
    for n_x in (15, 31, 63):
        model = build_model(combined_config([["x"]], n_x=n_x, n_t=16, a=["1 + 0.5*x"]))
        lams.append(principal_eigenvalue(model).lambda_star)
    ratio = abs(lams[0] - lams[1]) / abs(lams[1] - lams[2])
    assert np.log2(ratio) >= 1.7
