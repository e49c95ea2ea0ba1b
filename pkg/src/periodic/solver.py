# src/periodic/solver.py

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_banded

from ..discretize.stencil import diffusion_bands, trapezoid_average
from ..types.errors import BracketViolation, ConfigError, ConvergenceError
from ..types.index import (BoundaryKind, LimitReport, LimitRow, NonlinearModel, PeriodicSolution,
                           ReactionCheck, Setting)
from ..utils.helpers import run_points, trend_notes
from ..utils.settings import get_settings
from .reaction import validate_reaction

logger = logging.getLogger(__name__)

BRACKET_REL = 1e-6
TWO_SIDED_FACTOR = 10.0
_TINY = 1e-300


class _March:
    """One-period Patankar march: diffusion and the decaying part of G implicit, growth explicit."""

    def __init__(self, model: NonlinearModel, setting: Setting, x_index: Optional[int]):
        self.model = model
        self.setting = setting
        self.dt = model.tgrid.dt
        self.times = model.tgrid.times
        nodes = model.domain.nodes
        if setting is Setting.FROZEN_X and x_index is not None:
            if not 0 <= x_index < model.domain.n_nodes:
                raise ConfigError(f"x_index {x_index} outside 0..{model.domain.n_nodes - 1}", key="x_index")
            self.x = nodes[[x_index]]
        elif setting is Setting.AVERAGED:
            self.x = nodes[:1]
        else:
            self.x = nodes
        self.bands = None
        if setting is Setting.PDE:
            a_nodes = model.diffusion.a.samples[:, 0].transpose(0, 2, 1)
            lower, diag, upper = diffusion_bands(a_nodes, model.domain.h, BoundaryKind.NEUMANN)
            kdt = (model.diffusion.kappa * self.dt)[:, None, None]
            self.bands = (-kdt * lower, 1.0 - kdt * diag, -kdt * upper)

    @property
    def width(self) -> int:
        return len(self.x)

    def rate(self, k: int, w: np.ndarray) -> np.ndarray:
        G = self.model.reaction.G
        t = self.times[k]
        if self.setting is Setting.AVERAGED:
            nodes = self.model.domain.nodes
            values = G(nodes, t, [np.full(nodes.shape, v) for v in w[:, 0]])
            return trapezoid_average(values, self.model.domain, axis=-1)[:, None]
        return G(self.x, t, list(w))

    def step(self, k: int, w: np.ndarray) -> np.ndarray:
        g = self.rate(k, w)
        grow = np.maximum(g, 0.0)
        decay = np.maximum(-g, 0.0) / np.maximum(w, _TINY)
        rhs = w + self.dt * grow
        if self.bands is None:
            return rhs / (1.0 + self.dt * decay)
        k1 = (k + 1) % len(self.times)
        lower, diag, upper = self.bands
        out = np.empty_like(w)
        ab = np.zeros((3, w.shape[1]))
        for i in range(w.shape[0]):
            ab[0, 1:] = upper[i, k1]
            ab[1] = diag[i, k1] + self.dt * decay[i]
            ab[2, :-1] = lower[i, k1]
            out[i] = solve_banded((1, 1), ab, rhs[i])
        return out


def _bracket(model: NonlinearModel, check: ReactionCheck, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-time lower envelope (n, n_t) and the constant upper bound (n,), both with O(dt) slack."""
    spec = model.reaction
    t = model.tgrid.times
    lower = check.tau1 * spec.v_lower(t)
    upper = check.tau2 * spec.v_upper
    x = model.domain.nodes[:, None]
    rate_scale = float(np.abs(spec.G(x, t[None, :], [np.full((1, 1), v) for v in upper])).max())
    drift = float(np.abs(check.tau1 * spec.v_lower_prime(t)).max())
    slack = BRACKET_REL * upper + dt * (rate_scale + drift)
    return lower - slack[:, None], upper + slack


def _check_bracket(w: np.ndarray, lo: np.ndarray, hi: np.ndarray, k: int) -> None:
    below = lo[:, None] - w
    above = w - hi[:, None]
    for gap, side in ((below, "below the subsolution"), (above, "above the supersolution")):
        if gap.max() > 0:
            i, node = np.unravel_index(np.argmax(gap), gap.shape)
            raise BracketViolation(f"periodic march went {side} by {gap.max():.3g}", int(i), int(node), k)


def _run(march: _March, start: np.ndarray, lo: np.ndarray, hi: np.ndarray, tol_fp: float,
         max_periods: int) -> Tuple[np.ndarray, float, int]:
    n_t = len(march.times)
    w = start.copy()
    traj = np.empty(w.shape + (n_t,))
    for period in range(1, max_periods + 1):
        state = w
        for k in range(n_t):
            traj[..., k] = state
            state = march.step(k, state)
            _check_bracket(state, lo[:, (k + 1) % n_t], hi, (k + 1) % n_t)
        if not np.all(np.isfinite(state)):
            raise ConvergenceError(f"periodic march produced non-finite values in period {period}")
        defect = float(np.abs(state - w).max())
        w = state
        if defect < tol_fp:
            logger.debug("fixed point after %d periods (defect %.3g)", period, defect)
            return traj, defect, period
    raise ConvergenceError(f"no periodic fixed point within {max_periods} periods (last defect {defect:.3g})")


def solve_periodic(model: NonlinearModel, kappa=None, setting: Setting = Setting.PDE,
                   x_index: Optional[int] = None, check: Optional[ReactionCheck] = None,
                   two_sided: bool = True, settings=None) -> PeriodicSolution:
    """Positive T-periodic solution by iterating the period map from the supersolution.

    FROZEN_X with x_index None solves the pointwise ODE at every node at once.
    With two_sided set a second march starts from the subsolution and the
    sup-norm distance between the two limits is recorded.
    """
    settings = settings or get_settings()
    setting = Setting(setting)
    if kappa is not None:
        model = model.with_kappa(kappa)
    if setting is Setting.PDE and model.boundary.kind is not BoundaryKind.NEUMANN:
        raise ConfigError("periodic solutions are computed under Neumann conditions", key="boundary.kind")
    if check is None:
        check = validate_reaction(model)
    if not check.ok:
        raise ConfigError("reaction certificates fail: " + "; ".join(check.violations), key="nonlinear")

    march = _March(model, setting, x_index)
    lo, hi = _bracket(model, check, march.dt)
    upper = np.repeat((check.tau2 * model.reaction.v_upper)[:, None], march.width, axis=1)
    traj, residual, periods = _run(march, upper, lo, hi, settings.tol_fp, settings.max_periods)

    gap = None
    if two_sided:
        lower0 = check.tau1 * model.reaction.v_lower(model.tgrid.times[:1])
        start = np.repeat(lower0, march.width, axis=1)
        other, _, _ = _run(march, start, lo, hi, settings.tol_fp, settings.max_periods)
        gap = float(np.abs(traj - other).max())
        if gap > TWO_SIDED_FACTOR * settings.tol_fp:
            logger.warning("starts from the sub- and supersolution disagree by %.3g", gap)

    if march.width == model.domain.n_nodes:
        w_tilde = trapezoid_average(traj, model.domain, axis=1)
        w_hat = float(np.abs(traj - w_tilde[:, None, :]).max())
    else:
        w_tilde, w_hat = traj[:, 0, :].copy(), 0.0
    logger.info("periodic solution (%s): sup %.6g, residual %.3g after %d periods",
                setting.value, traj.max(), residual, periods)
    return PeriodicSolution(w=traj, w_tilde=w_tilde, w_hat_norm=w_hat, residual=residual,
                            kappa=model.diffusion.kappa.copy(), setting=setting, periods=periods,
                            bracket=(check.tau1, check.tau2), two_sided_gap=gap)


def _limit_grid(kappa_grid: Sequence, descending: bool) -> List[np.ndarray]:
    grid = [np.atleast_1d(np.asarray(k, dtype=float)) for k in kappa_grid]
    if not grid:
        raise ConfigError("empty kappa grid", key="kappa_grid")
    if any(np.any(k <= 0) for k in grid):
        raise ConfigError("non-positive diffusion in kappa grid", key="kappa_grid")
    firsts = [k.max() for k in grid]
    ordered = all((b < a) if descending else (b > a) for a, b in zip(firsts, firsts[1:]))
    if not ordered:
        order = "descending" if descending else "ascending"
        raise ConfigError(f"kappa grid must be strictly {order}", key="kappa_grid")
    return grid


def _valid(model: NonlinearModel) -> ReactionCheck:
    check = validate_reaction(model)
    if not check.ok:
        raise ConfigError("reaction certificates fail: " + "; ".join(check.violations), key="nonlinear")
    return check


def limit_check_zero(model: NonlinearModel, kappa_grid: Sequence, jobs: int = 1, progress: bool = False,
                     settings=None) -> LimitReport:
    """Sup-norm distance of w_kappa to the pointwise solution w_0 along descending kappa."""
    settings = settings or get_settings()
    grid = _limit_grid(kappa_grid, descending=True)
    check = _valid(model)
    w0 = solve_periodic(model, setting=Setting.FROZEN_X, check=check, settings=settings).w

    def point(kappa):
        sol = solve_periodic(model, kappa, Setting.PDE, check=check, settings=settings)
        return LimitRow(kappa=kappa, gap_avg=float(np.abs(sol.w - w0).max()), gap_hat=sol.w_hat_norm,
                        residual=sol.residual, periods=sol.periods)

    rows = run_points(point, grid, jobs, progress, "kappa -> 0", prefer="threads")
    floor = TWO_SIDED_FACTOR * settings.tol_fp
    notes = trend_notes([r.gap_avg for r in rows], decreasing=True, label="||w_kappa - w_0||", floor=floor)
    report = LimitReport(direction="zero", rows=rows, reference_norm=float(np.abs(w0).max()), notes=notes)
    for note in notes:
        logger.info("limit kappa -> 0: %s", note)
    return report


def limit_check_infty(model: NonlinearModel, kappa_grid: Sequence, jobs: int = 1, progress: bool = False,
                      settings=None) -> LimitReport:
    """Distance of the spatial average to w~_inf and size of the deviation w^ along ascending kappa."""
    settings = settings or get_settings()
    grid = _limit_grid(kappa_grid, descending=False)
    check = _valid(model)
    w_inf = solve_periodic(model, setting=Setting.AVERAGED, check=check, settings=settings).w_tilde

    def point(kappa):
        sol = solve_periodic(model, kappa, Setting.PDE, check=check, settings=settings)
        return LimitRow(kappa=kappa, gap_avg=float(np.abs(sol.w_tilde - w_inf).max()), gap_hat=sol.w_hat_norm,
                        residual=sol.residual, periods=sol.periods)

    rows = run_points(point, grid, jobs, progress, "kappa -> inf", prefer="threads")
    floor = TWO_SIDED_FACTOR * settings.tol_fp
    notes = trend_notes([r.gap_avg for r in rows], decreasing=True, label="||w~_kappa - w~_inf||", floor=floor)
    notes += trend_notes([r.gap_hat for r in rows], decreasing=True, label="||w^_kappa||", floor=floor)
    report = LimitReport(direction="infinity", rows=rows, reference_norm=float(np.abs(w_inf).max()), notes=notes)
    for note in notes:
        logger.info("limit kappa -> inf: %s", note)
    return report
