# tests/test_cli.py
import pandas as pd
import pytest

from tests.conftest import fixture_path
from src.main import VIOLATION_COLUMNS, run

SMALL = ["--set", "domain.n_x=8", "--set", "time.n_t=40"]


def _args(command, config, out, *extra):
    return [command, "--config", fixture_path(config), "--out", str(out), *extra]


def test_validate_writes_empty_violation_table(tmp_path):
    assert run(_args("validate", "scalar_neumann.toml", tmp_path, *SMALL)) == 0
    frame = pd.read_csv(tmp_path / "violations.csv")
    assert list(frame.columns) == VIOLATION_COLUMNS + ["config_hash", "n_x", "n_t"]
    assert frame.empty
    summary = (tmp_path / "summary.txt").read_text()
    assert "all assumptions hold: True" in summary
    assert "config_hash: " in summary


def test_validate_fails_on_sign_violation(tmp_path):
    code = run(_args("validate", "scalar_neumann.toml", tmp_path, *SMALL, "--set", 'reaction.F=[["x - 0.5"]]'))
    assert code == 1
    frame = pd.read_csv(tmp_path / "violations.csv")
    assert set(frame["assumption"]) == {"F >= 0"}


def test_r0_tables_carry_run_metadata(tmp_path):
    assert run(_args("r0", "scalar_neumann.toml", tmp_path, *SMALL)) == 0
    frame = pd.read_csv(tmp_path / "r0.csv")
    assert frame.loc[0, "status"] == "positive"
    assert 1.5 < frame.loc[0, "value"] < 2.0
    assert frame.loc[0, "n_x"] == 8
    assert len(frame.loc[0, "config_hash"]) == 12
    trace = pd.read_csv(tmp_path / "omega_trace.csv")
    assert list(trace.columns[:3]) == ["probe", "mu", "omega"]


def test_reruns_are_byte_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(_args("r0", "scalar_neumann.toml", first, *SMALL)) == 0
    assert run(_args("r0", "scalar_neumann.toml", second, *SMALL)) == 0
    for name in ("r0.csv", "omega_trace.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_pointwise_r0_table(tmp_path):
    assert run(_args("r0", "scalar_neumann.toml", tmp_path, *SMALL, "--setting", "frozen_x")) == 0
    frame = pd.read_csv(tmp_path / "r0_pointwise.csv")
    assert len(frame) == 10
    assert frame["value"].iloc[-1] == pytest.approx(2.0, rel=1e-5)


def test_averaged_r0_with_direct_cross_check(tmp_path):
    assert run(_args("r0", "scalar_periodic.toml", tmp_path, "--setting", "averaged", "--direct")) == 0
    frame = pd.read_csv(tmp_path / "r0.csv")
    assert frame.loc[0, "direct"] == pytest.approx(frame.loc[0, "value"], rel=2e-2)


def test_sweep_appends_limit_rows(tmp_path):
    code = run(_args("sweep", "scalar_neumann.toml", tmp_path, *SMALL, "--kappa-grid", "0.01,1,100"))
    assert code == 0
    frame = pd.read_csv(tmp_path / "sweep.csv")
    assert len(frame) == 5
    assert "wall_ms" not in frame.columns
    limits = frame[frame["status"] == "limit"]
    assert list(limits["kappa_1"]) == [0.0, float("inf")]
    assert limits["value"].iloc[0] == pytest.approx(2.0, rel=1e-5)


def test_eig_command(tmp_path):
    assert run(_args("eig", "eig_2x2.toml", tmp_path, *SMALL)) == 0
    frame = pd.read_csv(tmp_path / "eig.csv")
    assert list(frame.columns[:2]) == ["kappa_1", "kappa_2"]
    assert frame.loc[0, "bc"] == "neumann"


def test_periodic_command(tmp_path):
    assert run(_args("periodic", "logistic.toml", tmp_path, "--set", "domain.n_x=4", "--setting", "averaged")) == 0
    frame = pd.read_csv(tmp_path / "periodic_solution.csv")
    assert len(frame) == 100
    assert frame["w"].to_numpy() == pytest.approx(1.5, abs=1e-6)


def test_bad_kappa_is_a_config_error(tmp_path):
    assert run(_args("r0", "bad_kappa.toml", tmp_path)) == 2


def test_missing_config_is_a_config_error(tmp_path):
    assert run(_args("r0", "nope.toml", tmp_path)) == 2


def test_unknown_setting_is_a_usage_error(tmp_path):
    assert run(_args("r0", "scalar_neumann.toml", tmp_path, *SMALL, "--setting", "spectral")) == 2


def test_bracket_failure_is_a_computation_error(tmp_path):
    growing = ["--set", 'reaction.V=[["-0.5"]]']
    assert run(_args("r0", "scalar_neumann.toml", tmp_path, *SMALL, *growing, "--setting", "averaged")) == 1


def test_frozen_eigenvalue_needs_a_node(tmp_path):
    assert run(_args("eig", "eig_2x2.toml", tmp_path, *SMALL, "--setting", "frozen_x")) == 2


def test_node_outside_the_grid_is_a_usage_error(tmp_path):
    args = _args("r0", "scalar_neumann.toml", tmp_path, *SMALL, "--setting", "frozen_x", "--x-index", "999")
    assert run(args) == 2
    assert run(_args("eig", "eig_2x2.toml", tmp_path, *SMALL, "--setting", "frozen_x", "--x-index=-1")) == 2


def test_frozen_eigenvalue_at_a_node(tmp_path):
    assert run(_args("eig", "eig_2x2.toml", tmp_path, *SMALL, "--setting", "frozen_x", "--x-index", "9")) == 0
    frame = pd.read_csv(tmp_path / "eig.csv")
    assert frame.loc[0, "setting"] == "frozen_x"
