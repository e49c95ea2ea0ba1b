# tests/test_sweep.py
import numpy as np
import pytest

from tests.conftest import combined_config, scalar_config
from src.model.model import build_model
from src.r0.sweep import check_kappa_grid, default_kappa_grid, endpoint_note, sweep
from src.types import ConfigError
from src.types.index import BoundaryKind
from src.utils.helpers import trend_notes


def test_default_grid_spans_decades():
    grid = default_kappa_grid()
    assert grid[0] == pytest.approx(1e-4)
    assert grid[-1] == pytest.approx(1e3)
    assert check_kappa_grid(grid)[0].shape == (1,)


@pytest.mark.parametrize("grid", [[], [1.0, 0.5], [0.0, 1.0], [[1.0, -1.0]]])
def test_bad_grids_rejected(grid):
    with pytest.raises(ConfigError):
        check_kappa_grid(grid)


def test_unknown_quantity_rejected():
    model = build_model(scalar_config(n_x=4, n_t=20))
    with pytest.raises(ConfigError):
        sweep(model, [1.0], what="growth")


def test_neumann_r0_sweep_approaches_both_limits():
    model = build_model(scalar_config(beta="1 + x", n_x=16, n_t=40))
    report = sweep(model, [1e-5, 1e-1, 1e1, 1e3])
    assert report.bc is BoundaryKind.NEUMANN
    assert report.limit_small == pytest.approx(2.0, rel=1e-5)
    assert report.limit_large == pytest.approx(1.5, rel=1e-5)
    assert report.values[0] == pytest.approx(report.limit_small, rel=2e-2)
    assert report.values[-1] == pytest.approx(report.limit_large, rel=1e-3)
    assert all(s == "positive" for s in report.statuses)
    assert len(report.wall_ms) == 4
    assert any(note.startswith("small kappa") for note in report.monotonicity_notes)


def test_dirichlet_r0_decreases_to_zero():
    model = build_model(scalar_config(beta="2 + x", n_x=16, n_t=40, kind="dirichlet"))
    report = sweep(model, [1e-2, 1e-1, 1.0, 10.0])
    assert report.limit_large == 0.0
    assert all(b < a for a, b in zip(report.values, report.values[1:]))
    assert not any("trend broken" in note for note in report.monotonicity_notes)
    assert report.values[-1] < 0.5


def test_eigenvalue_sweep_limits_and_bounds():
    model = build_model(combined_config([["x"]], kind="dirichlet", n_x=8, n_t=40))
    report = sweep(model, [0.1, 1.0, 10.0], what="eigenvalue")
    eta_max, _ = report.eta_values
    assert report.limit_small == pytest.approx(-eta_max)
    assert report.limit_large == np.inf
    assert len(report.lower_bounds) == 3
    assert all(v >= b - 1e-9 for v, b in zip(report.values, report.lower_bounds))
    assert all(b > a for a, b in zip(report.values, report.values[1:]))


def test_parallel_sweep_matches_serial():
    model = build_model(scalar_config(beta="1 + x", n_x=8, n_t=20))
    serial = sweep(model, [0.1, 1.0, 10.0])
    parallel = sweep(model, [0.1, 1.0, 10.0], jobs=2)
    assert np.allclose(serial.values, parallel.values, rtol=0, atol=0)


def test_trend_notes_flag_wrong_direction():
    assert trend_notes([3.0, 2.0, 1.0], decreasing=True, label="R0") == ["R0: nonincreasing within 10% band"]
    # small wiggles inside the band are tolerated
    assert trend_notes([1.0, 1.05, 1.0], decreasing=True, label="R0")[0].endswith("band")
    notes = trend_notes([1.0, 2.0, 1.5], decreasing=True, label="R0")
    assert "trend broken between points 0 and 1" in notes[0]


def test_endpoint_note_reports_gap():
    note = endpoint_note("large kappa", 1.01, 1.0)
    assert "1.000%" in note
    assert "limit inf" in endpoint_note("large kappa", 5.0, np.inf)
