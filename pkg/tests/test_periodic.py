# tests/test_periodic.py
import numpy as np
import pytest

from tests.conftest import fixture_path, nonlinear_config, periodic_logistic
from src.data.loader import load_config
from src.periodic.reaction import build_nonlinear_model, validate_reaction
from src.periodic.solver import limit_check_infty, limit_check_zero, solve_periodic
from src.types import BracketViolation, ConfigError
from src.types.index import ReactionCheck, Setting

LOGISTIC = "(1 + x)*q1 - q1**2"


@pytest.fixture
def logistic():
    config, _ = load_config(fixture_path("logistic.toml"))
    return build_nonlinear_model(config)


def test_logistic_certificates(logistic):
    check = validate_reaction(logistic)
    assert check.ok
    assert check.tau2 == 1.0
    assert check.tau1 == 1.0
    # h is half the smallest decay at v_upper: 16 - 2*4 = 8
    assert logistic.reaction.h == pytest.approx(4.0)
    assert logistic.reaction.jacobian_offdiag_nonneg


def test_frozen_solution_is_pointwise_equilibrium(logistic):
    sol = solve_periodic(logistic, setting=Setting.FROZEN_X)
    x = logistic.domain.nodes
    assert sol.w.shape == (1, len(x), logistic.tgrid.n_t)
    assert np.allclose(sol.w[0], (1 + x)[:, None], atol=1e-7)
    assert sol.two_sided_gap < 1e-7
    assert sol.residual < 1e-9


def test_single_node_frozen_solution(logistic):
    sol = solve_periodic(logistic, setting=Setting.FROZEN_X, x_index=0, two_sided=False)
    assert sol.w.shape == (1, 1, logistic.tgrid.n_t)
    assert np.allclose(sol.w, 1.0, atol=1e-7)
    assert sol.two_sided_gap is None
    with pytest.raises(ConfigError):
        solve_periodic(logistic, setting=Setting.FROZEN_X, x_index=99)


def test_averaged_solution_uses_mean_growth(logistic):
    sol = solve_periodic(logistic, setting=Setting.AVERAGED)
    assert np.allclose(sol.w_tilde, 1.5, atol=1e-7)
    assert sol.w_hat_norm == 0.0


def test_periodic_growth_rate_time_average():
    """For w' = w (r(t) - w) the periodic solution has the time average of r."""
    raw = nonlinear_config(["(2 + sin(2*pi*t/T))*q1 - q1**2"], [0.5], [6.0], n_x=4, n_t=400)
    model = build_nonlinear_model(raw)
    sol = solve_periodic(model, setting=Setting.AVERAGED)
    w = sol.w_tilde[0]
    assert w.mean() == pytest.approx(2.0, rel=1e-2)
    assert w.max() - w.min() > 0.1
    assert np.all(w > 0)


def test_periodic_logistic_matches_closed_form():
    raw = nonlinear_config(["(1 + 0.5*sin(2*pi*t/T))*q1 - q1**2"], [0.25], [4.0], n_x=4, n_t=800)
    model = build_nonlinear_model(raw)
    sol = solve_periodic(model, setting=Setting.FROZEN_X, x_index=0, two_sided=False)
    exact = periodic_logistic(model.tgrid.times)
    assert np.allclose(sol.w[0, 0], exact, rtol=1e-2)
    assert np.ptp(exact) > 0.2


def test_pde_solution_is_bracketed_and_between_limits(logistic):
    sol = solve_periodic(logistic, kappa=1.0)
    x = logistic.domain.nodes
    assert np.all(sol.w > 0)
    assert sol.w.min() >= 1.0 - 1e-6
    assert sol.w.max() <= 2.0 + 1e-6
    # diffusion pulls the profile toward its mean but not flat
    assert sol.w_hat_norm > 0.0
    assert sol.w_hat_norm < np.abs(1 + x - 1.5).max()
    assert sol.bracket == (1.0, 1.0)


def test_two_component_cooperative_system():
    G = ["q2 - q1**2", "q1 - q2"]
    model = build_nonlinear_model(nonlinear_config(G, ["0.5", "0.5"], [2.0, 3.0], n_x=8, n_t=100))
    sol = solve_periodic(model, kappa=0.5)
    # the positive equilibrium is (1, 1)
    assert np.allclose(sol.w, 1.0, atol=1e-6)


def test_limit_to_zero_diffusion(logistic):
    report = limit_check_zero(logistic, [1.0, 0.1, 0.01])
    gaps = [row.gap_avg for row in report.rows]
    assert gaps[0] > gaps[1] > gaps[2]
    assert report.direction == "zero"
    assert report.reference_norm == pytest.approx(2.0, rel=1e-6)
    assert report.notes[0].endswith("band")


def test_limit_to_infinite_diffusion(logistic):
    report = limit_check_infty(logistic, [1.0, 10.0, 100.0])
    assert [row.gap_hat for row in report.rows] == sorted((row.gap_hat for row in report.rows), reverse=True)
    assert report.rows[-1].gap_avg < 1e-2
    assert report.rows[-1].gap_hat < 1e-2
    assert report.reference_norm == pytest.approx(1.5, rel=1e-6)


def test_limit_grid_order_enforced(logistic):
    with pytest.raises(ConfigError):
        limit_check_zero(logistic, [0.1, 1.0])
    with pytest.raises(ConfigError):
        limit_check_infty(logistic, [1.0, 0.1])


def test_supersolution_failure_is_reported():
    model = build_nonlinear_model(nonlinear_config(["q1"], [0.5], [1.0], n_x=4, h=0.1))
    check = validate_reaction(model)
    assert not check.h4_ok
    with pytest.raises(ConfigError):
        solve_periodic(model)


def test_subsolution_failure_is_reported():
    model = build_nonlinear_model(nonlinear_config(["-q1"], [0.5], [1.0], n_x=4))
    check = validate_reaction(model)
    assert not check.h3_ok
    assert any("subsolution" in v for v in check.violations)


def test_competitive_coupling_fails_cooperativity():
    G = ["q1*(1 - q1 - q2)", "q2*(1 - q1 - q2)"]
    model = build_nonlinear_model(nonlinear_config(G, ["0.1", "0.1"], [2.0, 2.0], n_x=4))
    check = validate_reaction(model)
    assert not check.h1_ok
    assert not model.reaction.jacobian_offdiag_nonneg


@pytest.mark.parametrize("field, value", [("v_lower", ["0.5 + x"]), ("v_upper", [0.0])])
def test_bad_certificates_rejected(field, value):
    raw = nonlinear_config([LOGISTIC], ["0.5"], [4.0], n_x=4)
    raw["nonlinear"][field] = value
    with pytest.raises(ConfigError):
        build_nonlinear_model(raw)


def test_march_leaving_the_bracket_raises(logistic):
    # a supersolution scale of 0.25 puts the upper bound at 1, below the solution 1 + x
    check = ReactionCheck(h1_ok=True, h3_ok=True, h4_ok=True, tau1=0.1, tau2=0.25)
    with pytest.raises(BracketViolation) as info:
        solve_periodic(logistic, setting=Setting.FROZEN_X, check=check, two_sided=False)
    assert info.value.component == 0


def test_dirichlet_pde_rejected():
    raw = nonlinear_config([LOGISTIC], ["0.5"], [4.0], n_x=4)
    raw["boundary"]["kind"] = "dirichlet"
    with pytest.raises(ConfigError):
        solve_periodic(build_nonlinear_model(raw))
