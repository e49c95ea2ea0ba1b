# src/zika/zika.py

"""Host-vector Zika model: vector equilibrium, linearized infected subsystem, R0 and its limits.

Infected compartments are ordered (H_i, V_i). The total vector density V
solves a periodic logistic equation whose positive periodic solution V*
enters the linearization at the disease-free state (0, 0, V*).
"""

import logging
import time
from dataclasses import replace
from typing import Optional, Sequence, Union

import numpy as np

from ..data.expressions import sample_field
from ..data.loader import ModelConfig, NonlinearConfig, parse_config
from ..discretize.stencil import trapezoid_average
from ..model.model import build_grids, check_step_bound
from ..periodic.reaction import build_reaction
from ..periodic.solver import solve_periodic
from ..r0.r0 import r0_bisect, r0_pointwise_max
from ..r0.sweep import check_kappa_grid, endpoint_note
from ..types.errors import ConfigError
from ..types.index import (BoundaryKind, BoundarySpec, CoefficientField, DiffusionSpec, ModelSpec,
                           NonlinearModel, PeriodicSolution, R0Options, R0Result, Setting, SweepReport,
                           ZikaLimits, ZikaParams)
from ..utils.helpers import run_points
from ..utils.settings import get_settings

logger = logging.getLogger(__name__)

POSITIVE = ("H_u", "beta", "gamma", "mu1", "mu2", "delta1", "delta2")
NONNEGATIVE = ("sigma1", "sigma2")
LOWER_FRACTION = 0.5
UPPER_FACTOR = 2.0


def build_zika_params(config: Union[ModelConfig, dict]) -> ZikaParams:
    """Sample the [zika] section on the grid and check positivity and beta - mu1 > 0."""
    if isinstance(config, dict):
        config = parse_config(config)
    if config.zika is None:
        raise ConfigError("missing [zika] section", key="zika")
    domain, tgrid = build_grids(config)
    x, t, T = domain.nodes, tgrid.times, tgrid.period
    cfg = config.zika
    expressions, fields = {}, {}
    for name in POSITIVE + NONNEGATIVE:
        text = str(getattr(cfg, name))
        expressions[name] = text
        fields[name] = sample_field(text, x, t, T, key=f"zika.{name}")
    for name in POSITIVE:
        if not np.all(fields[name] > 0):
            raise ConfigError(f"{name} must be strictly positive", key=f"zika.{name}")
    for name in NONNEGATIVE:
        if np.any(fields[name] < 0):
            raise ConfigError(f"{name} must be nonnegative", key=f"zika.{name}")
    if not np.allclose(fields["H_u"], fields["H_u"][:, :1]):
        raise ConfigError("H_u may only depend on x", key="zika.H_u")
    growth = fields["beta"] - fields["mu1"]
    if not np.all(growth > 0):
        node, k = np.unravel_index(np.argmin(growth), growth.shape)
        raise ConfigError(f"beta - mu1 must be positive; {growth[node, k]:.6g} at x={x[node]:.6g}, "
                          f"t={t[k]:.6g}", key="zika.beta")
    return ZikaParams(domain=domain, tgrid=tgrid, expressions=expressions, kappa1=cfg.kappa1, kappa2=cfg.kappa2,
                      **fields)


def _field(samples: np.ndarray, period: float) -> CoefficientField:
    return CoefficientField(np.asarray(samples, dtype=float)[None, None], period)


def vector_model(params: ZikaParams, kappa2: Optional[float] = None) -> NonlinearModel:
    """Logistic equation V' = kappa2 d/dx(delta2 dV/dx) + (beta - mu1) V - mu2 V^2 under Neumann conditions."""
    e = params.expressions
    logistic = f"(({e['beta']}) - ({e['mu1']}))*q1 - ({e['mu2']})*q1**2"
    ratio = (params.beta - params.mu1) / params.mu2
    cfg = NonlinearConfig(G=[logistic], v_lower=[LOWER_FRACTION * float(ratio.min())],
                          v_upper=[UPPER_FACTOR * float(ratio.max())])
    x, t = params.domain.nodes, params.tgrid.times
    reaction = build_reaction(cfg, params.tgrid.period, x, t)
    kappa2 = params.kappa2 if kappa2 is None else kappa2
    diffusion = DiffusionSpec(kappa=np.array([kappa2], dtype=float), a=_field(params.delta2, params.tgrid.period))
    return NonlinearModel(domain=params.domain, tgrid=params.tgrid, diffusion=diffusion,
                          boundary=BoundarySpec(BoundaryKind.NEUMANN), reaction=reaction, label="zika vector")


def solve_vector_equilibrium(params: ZikaParams, kappa2: Optional[float] = None, setting: Setting = Setting.PDE,
                             settings=None) -> PeriodicSolution:
    """Positive periodic vector density V*; FROZEN_X gives V_0 at every node, AVERAGED gives V~_inf."""
    solution = solve_periodic(vector_model(params, kappa2), setting=setting, settings=settings)
    if not np.all(solution.w > 0):
        raise ConfigError("vector equilibrium is not strictly positive", key="zika")
    return solution


def zika_model(params: ZikaParams, v_star: np.ndarray, kappa1: Optional[float] = None,
               kappa2: Optional[float] = None) -> ModelSpec:
    """Split model of (H_i, V_i) linearized at (0, 0, V*); v_star has shape (n_x + 2, n_t)."""
    T = params.tgrid.period
    v_star = np.broadcast_to(np.asarray(v_star, dtype=float), params.beta.shape)
    zero = np.zeros_like(params.beta)
    V = np.array([[params.gamma, zero], [zero, params.mu1 + params.mu2 * v_star]])
    F = np.array([[zero, params.sigma1 * params.H_u], [params.sigma2 * v_star, zero]])
    kappa = np.array([params.kappa1 if kappa1 is None else kappa1, params.kappa2 if kappa2 is None else kappa2])
    a = np.stack([params.delta1, params.delta2])[:, None]
    model = ModelSpec(domain=params.domain, tgrid=params.tgrid,
                      diffusion=DiffusionSpec(kappa=kappa, a=CoefficientField(a, T)),
                      boundary=BoundarySpec(BoundaryKind.NEUMANN),
                      V=CoefficientField(V, T), F=CoefficientField(F, T), label="zika infected")
    check_step_bound(model.generator(), params.tgrid)
    return model


def zika_r0(params: ZikaParams, opts: Optional[R0Options] = None, settings=None) -> R0Result:
    """R0(kappa1, kappa2) of the infected subsystem at the disease-free periodic state."""
    settings = settings or get_settings()
    v_star = solve_vector_equilibrium(params, settings=settings).w[0]
    result = r0_bisect(zika_model(params, v_star), setting=Setting.PDE, opts=opts, settings=settings)
    logger.info("zika R0(kappa1=%g, kappa2=%g) = %.10g", params.kappa1, params.kappa2, result.value)
    return result


def averaged_zika_model(params: ZikaParams, v_inf: np.ndarray) -> ModelSpec:
    """x-constant model from gamma~, mu1~ + mu2~ V~_inf, f~12 = avg(sigma1 H_u) and sigma2~ V~_inf."""
    def avg(samples):
        return np.broadcast_to(trapezoid_average(samples, params.domain, axis=0), params.beta.shape)

    T = params.tgrid.period
    zero = np.zeros_like(params.beta)
    v_inf = np.broadcast_to(np.asarray(v_inf, dtype=float), params.beta.shape)
    V = np.array([[avg(params.gamma), zero], [zero, avg(params.mu1) + avg(params.mu2) * v_inf]])
    F = np.array([[zero, avg(params.sigma1 * params.H_u)], [avg(params.sigma2) * v_inf, zero]])
    a = np.stack([params.delta1, params.delta2])[:, None]
    return ModelSpec(domain=params.domain, tgrid=params.tgrid,
                     diffusion=DiffusionSpec(kappa=np.array([params.kappa1, params.kappa2]),
                                             a=CoefficientField(a, T)),
                     boundary=BoundarySpec(BoundaryKind.NEUMANN),
                     V=CoefficientField(V, T), F=CoefficientField(F, T), label="zika averaged")


def zika_limits(params: ZikaParams, opts: Optional[R0Options] = None, settings=None) -> ZikaLimits:
    """Small-diffusion endpoint max_x R0(x) with V_0 and large-diffusion endpoint with V~_inf."""
    settings = settings or get_settings()
    v0 = solve_vector_equilibrium(params, setting=Setting.FROZEN_X, settings=settings).w[0]
    pointwise = r0_pointwise_max(zika_model(params, v0), opts, settings)
    v_inf = solve_vector_equilibrium(params, setting=Setting.AVERAGED, settings=settings).w_tilde[0]
    averaged = r0_bisect(averaged_zika_model(params, v_inf), setting=Setting.AVERAGED, opts=opts,
                         settings=settings)
    logger.info("zika limits: small kappa %.10g (x = %.6g), large kappa %.10g",
                pointwise.max_value, pointwise.x_argmax, averaged.value)
    return ZikaLimits(small=pointwise.max_value, large=averaged.value, small_argmax=pointwise.argmax,
                      pointwise=pointwise, averaged=averaged)


def zika_sweep(params: ZikaParams, kappa_grid: Sequence[float], opts: Optional[R0Options] = None, jobs: int = 1,
               progress: bool = False, settings=None) -> SweepReport:
    """zika_r0 along kappa1 = kappa2 = kappa, with both limit endpoints."""
    settings = settings or get_settings()
    grid = check_kappa_grid(kappa_grid)

    def point(kappa):
        started = time.perf_counter()
        k = float(kappa.max())
        result = zika_r0(replace(params, kappa1=k, kappa2=k), opts, settings)
        return result.value, result.status.value, result.omega_at_value, (time.perf_counter() - started) * 1000.0

    rows = run_points(point, grid, jobs, progress, "zika sweep", prefer="threads")
    limits = zika_limits(params, opts, settings)
    values = [r[0] for r in rows]
    notes = [endpoint_note("small kappa", values[0], limits.small),
             endpoint_note("large kappa", values[-1], limits.large)]
    for note in notes:
        logger.info("zika sweep: %s", note)
    return SweepReport(what="r0", bc=BoundaryKind.NEUMANN, kappa_values=[np.full(2, k.max()) for k in grid],
                       values=values, statuses=[r[1] for r in rows], omega_at_values=[r[2] for r in rows],
                       limit_small=limits.small, limit_large=limits.large, monotonicity_notes=notes,
                       wall_ms=[r[3] for r in rows])
