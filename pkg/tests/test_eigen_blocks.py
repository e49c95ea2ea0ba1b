# tests/test_eigen_blocks.py
import numpy as np
import pytest

from tests.conftest import combined_config, fixture_path
from src.data.loader import load_config
from src.evolve.stepper import dense_generator
from src.model.model import build_model
from src.spectral.blocks import restrict, verify_block_consistency
from src.spectral.eigen import (blowup_lower_bound, eta, first_diffusion_eigenvalue, principal_eigenvalue,
                                reaction_bound, shift_reaction)
from src.types.index import BoundaryKind, Setting


def _discrete(s, dt):
    """lambda* of the backward Euler period map for a time-constant generator with top eigenvalue s."""
    return np.log(1 - dt * s) / dt


def test_constant_generator_matches_dense_eigenvalue():
    model = build_model(combined_config([["x"]], n_x=8, n_t=40))
    s = np.linalg.eigvals(dense_generator(model, 0)).real.max()
    lam = principal_eigenvalue(model).lambda_star
    assert lam == pytest.approx(_discrete(s, model.tgrid.dt), rel=1e-8)


def test_shift_moves_the_top_eigenvalue():
    model = build_model(combined_config([["x"]], n_x=8, n_t=40))
    s = np.linalg.eigvals(dense_generator(model, 0)).real.max()
    shifted = principal_eigenvalue(shift_reaction(model, 0.75)).lambda_star
    assert shifted == pytest.approx(_discrete(s + 0.75, model.tgrid.dt), rel=1e-8)


def test_eigenfunction_is_positive_and_normalized():
    config, _ = load_config(fixture_path("eig_2x2.toml"))
    result = principal_eigenvalue(build_model(config))
    phi = result.eigenfunction
    assert phi.shape == (2, 34, 200)
    assert phi.max() == pytest.approx(1.0)
    assert phi.min() > 0
    assert result.bc is BoundaryKind.NEUMANN


def test_dirichlet_eigenfunction_vanishes_on_the_boundary():
    model = build_model(combined_config([["1"]], kind="dirichlet", n_x=8, n_t=40))
    phi = principal_eigenvalue(model).eigenfunction
    assert np.all(phi[:, [0, -1], :] == 0.0)
    assert np.all(phi[:, 1:-1, :] > 0)


def test_eta_values_for_linear_reaction():
    model = build_model(combined_config([["x"]], n_x=8, n_t=200))
    eta_max, eta_tilde, argmax = eta(model)
    assert argmax == model.domain.n_nodes - 1
    assert eta_max == pytest.approx(-_discrete(1.0, model.tgrid.dt), rel=1e-8)
    assert eta_tilde == pytest.approx(0.5, rel=1e-2)


def test_neumann_eigenvalue_between_its_limits():
    config, _ = load_config(fixture_path("eig_2x2.toml"))
    model = build_model(config)
    eta_max, eta_tilde, _ = eta(model)
    lam = principal_eigenvalue(model).lambda_star
    assert -eta_max <= lam <= -eta_tilde


def test_ode_settings():
    model = build_model(combined_config([["x"]], n_x=8, n_t=40))
    frozen = principal_eigenvalue(model, setting=Setting.FROZEN_X, x_index=0)
    assert frozen.lambda_star == pytest.approx(0.0, abs=1e-12)
    assert frozen.eigenfunction.shape == (1, 1, 40)
    assert frozen.bc is None


def test_first_diffusion_eigenvalue_dirichlet():
    model = build_model(combined_config([["3"]], kind="dirichlet", n_x=15, n_t=40))
    h, dt = model.domain.h, model.tgrid.dt
    mu_h = 4.0 / h ** 2 * np.sin(np.pi * h / 2) ** 2
    assert first_diffusion_eigenvalue(model) == pytest.approx(np.log(1 + dt * mu_h) / dt, rel=1e-8)


def test_reaction_bound_and_blowup_bound():
    model = build_model(combined_config([["x", "0.2"], ["0.1", "-1"]], kind="dirichlet", n_x=8, n_t=40))
    assert reaction_bound(model) == pytest.approx(1.0)
    for kappa in (0.5, 2.0, 8.0):
        lam = principal_eigenvalue(model.with_kappa(kappa)).lambda_star
        bound = blowup_lower_bound(model, first_diffusion_eigenvalue(model, kappa))
        assert lam >= bound - 1e-9
    with pytest.raises(ValueError):
        blowup_lower_bound(build_model(combined_config([["x"]], n_x=8, n_t=40)), 1.0)


def test_restrict_keeps_selected_components():
    config, _ = load_config(fixture_path("eig_reducible.toml"))
    model = build_model(config)
    sub = restrict(model, [1])
    assert sub.n == 1
    assert np.allclose(sub.M.samples[0, 0], model.M.samples[1, 1])


def test_reducible_model_is_block_consistent():
    config, _ = load_config(fixture_path("eig_reducible.toml"))
    report = verify_block_consistency(build_model(config))
    assert report.ok, report.violations
    assert (0, 1) in report.zero_entries
    assert sorted(map(sorted, report.blocks)) == [[0], [1]]
    # growth of the coupled system is carried by its fastest block
    assert max(report.block_omegas) == pytest.approx(1.5, rel=1e-2)


def test_boundary_ordering():
    entries = [["1 + x", "0.5"], ["0.2", "x"]]
    robin_model = build_model(combined_config(entries, kappa=0.5, kind="robin", b=["2", "1 + x"], n_x=16, n_t=40))
    neumann = principal_eigenvalue(robin_model, bc="neumann").lambda_star
    robin = principal_eigenvalue(robin_model).lambda_star
    dirichlet = principal_eigenvalue(robin_model, bc="dirichlet").lambda_star
    assert neumann < robin < dirichlet


def test_enlarging_a_reaction_entry_does_not_raise_lambda():
    base = build_model(combined_config([["x", "0.1"], ["0.1", "1 - x"]], n_x=8, n_t=40))
    larger = build_model(combined_config([["x", "0.6"], ["0.1", "1 - x"]], n_x=8, n_t=40))
    assert principal_eigenvalue(larger).lambda_star <= principal_eigenvalue(base).lambda_star


def test_without_diffusion_growth_is_the_pointwise_maximum():
    model = build_model(combined_config([["x + 0.3*sin(2*pi*t/T)", "0.2"], ["0.2", "0.5*x"]], n_x=8, n_t=40))
    eta_max, _, _ = eta(model)
    lam = principal_eigenvalue(model.with_kappa(0.0)).lambda_star
    assert -lam == pytest.approx(eta_max, rel=1e-8)
