# src/r0/sweep.py

import logging
import math
import time
from typing import List, Optional, Sequence

import numpy as np

from ..evolve.stepper import resolve_boundary
from ..spectral.eigen import blowup_lower_bound, eta, first_diffusion_eigenvalue, principal_eigenvalue
from ..types.errors import ConfigError
from ..types.index import BoundaryKind, ModelSpec, R0Options, SweepReport
from ..utils.helpers import run_points, trend_notes
from ..utils.settings import get_settings
from .r0 import r0_averaged, r0_bisect, r0_pointwise_max

logger = logging.getLogger(__name__)

WHAT = ("r0", "eigenvalue")


def default_kappa_grid() -> List[float]:
    return [10.0 ** p for p in range(-4, 4)]


def check_kappa_grid(kappa_grid: Sequence) -> List[np.ndarray]:
    grid = [np.atleast_1d(np.asarray(k, dtype=float)) for k in kappa_grid]
    if not grid:
        raise ConfigError("empty kappa grid", key="kappa_grid")
    if any(np.any(k <= 0) for k in grid):
        raise ConfigError("non-positive diffusion in kappa grid", key="kappa_grid")
    firsts = [k.max() for k in grid]
    if any(b <= a for a, b in zip(firsts, firsts[1:])):
        raise ConfigError("kappa grid must be strictly ascending", key="kappa_grid")
    return grid


def _point(model: ModelSpec, kappa: np.ndarray, what: str, opts: R0Options, settings):
    started = time.perf_counter()
    scaled = model.with_kappa(kappa)
    if what == "r0":
        result = r0_bisect(scaled, opts=opts, settings=settings)
        row = (result.value, result.status.value, result.omega_at_value)
    else:
        result = principal_eigenvalue(scaled, settings=settings)
        row = (result.lambda_star, result.diagnostics.method.value, -result.lambda_star)
    return row + ((time.perf_counter() - started) * 1000.0,)


def endpoint_note(label: str, value: float, limit: float) -> str:
    if not (np.isfinite(value) and np.isfinite(limit)):
        return f"{label}: value {value:.6g}, limit {limit:.6g}"
    gap = abs(value - limit) / max(abs(limit), 1e-300)
    return f"{label}: value {value:.6g} vs limit {limit:.6g} (relative gap {gap:.3%})"


def sweep(model: ModelSpec, kappa_grid: Sequence, bc=None, what: str = "r0", opts: Optional[R0Options] = None,
          jobs: int = 1, progress: bool = False, settings=None) -> SweepReport:
    """R0 or lambda* along ascending kappa, with the analytic small and large kappa limits."""
    if what not in WHAT:
        raise ConfigError(f"unknown sweep quantity '{what}', expected one of {WHAT}", key="what")
    settings = settings or get_settings()
    opts = opts or R0Options()
    grid = check_kappa_grid(kappa_grid)
    if bc is not None:
        model = resolve_boundary(model, bc)
    kind = model.boundary.kind
    neumann = kind is BoundaryKind.NEUMANN

    rows = run_points(lambda k: _point(model, k, what, opts, settings), grid, jobs, progress, f"{what} sweep")
    values = [r[0] for r in rows]

    eta_values = lower_bounds = None
    if what == "r0":
        small = r0_pointwise_max(model, opts, settings).max_value
        large = r0_averaged(model, opts, settings).value if neumann else 0.0
        notes = trend_notes(values, decreasing=True, label="R0") if not neumann else []
    else:
        eta_max, eta_tilde, _ = eta(model, settings)
        eta_values = (eta_max, eta_tilde)
        small = -eta_max
        large = -eta_tilde if neumann else math.inf
        notes = trend_notes(values, decreasing=False, label="lambda*") if not neumann else []
        if not neumann:
            lower_bounds = [blowup_lower_bound(model, first_diffusion_eigenvalue(model, float(k.min()), settings))
                            for k in grid]
            for k, (value, bound) in enumerate(zip(values, lower_bounds)):
                if value < bound - 1e-9 * max(1.0, abs(bound)):
                    notes.append(f"lambda* below mu_1*kappa - n*m_bar at point {k}: {value:.6g} < {bound:.6g}")
    notes.append(endpoint_note("small kappa", values[0], small))
    notes.append(endpoint_note("large kappa", values[-1], large))
    for note in notes:
        logger.info("sweep: %s", note)
    return SweepReport(what=what, bc=kind, kappa_values=grid, values=values,
                       statuses=[r[1] for r in rows], omega_at_values=[r[2] for r in rows],
                       limit_small=float(small), limit_large=float(large), monotonicity_notes=notes,
                       eta_values=eta_values, lower_bounds=lower_bounds, wall_ms=[r[3] for r in rows])
