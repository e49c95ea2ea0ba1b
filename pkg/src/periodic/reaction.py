# src/periodic/reaction.py

import logging
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import sympy as sp

from ..data.expressions import T_VAR, X, compile_expression, parse_expression, state_symbols
from ..data.loader import ModelConfig, NonlinearConfig, parse_config
from ..model.model import build_boundary, build_diffusion, build_grids
from ..types.errors import ConfigError
from ..types.index import NonlinearModel, ReactionCheck, ReactionSpec

logger = logging.getLogger(__name__)

SUB_TAUS = tuple(round(0.1 * k, 1) for k in range(1, 11))
SUPER_TAUS = (1.0, 2.0, 4.0, 8.0, 16.0)
H_FRACTION = 0.5


def _vector_field(exprs: List[sp.Expr], period: float, n: int) -> Callable:
    """G(x, t, q) -> (n, *broadcast shape) from per-component expressions."""
    fns = [compile_expression(e, period, n) for e in exprs]

    def evaluate(x, t, q):
        return np.stack([np.asarray(f(x, t, *q)) for f in fns])

    return evaluate


def _matrix_field(exprs: List[List[sp.Expr]], period: float, n: int) -> Callable:
    fns = [[compile_expression(e, period, n) for e in row] for row in exprs]

    def evaluate(x, t, q):
        return np.stack([np.stack([np.asarray(f(x, t, *q)) for f in row]) for row in fns])

    return evaluate


def _time_vector(exprs: List[sp.Expr], period: float) -> Callable:
    fns = [compile_expression(e, period) for e in exprs]

    def evaluate(t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.asarray(f(0.0, t), dtype=float) for f in fns])

    return evaluate


def _estimate_h(G: Callable, v_upper: np.ndarray, x: np.ndarray, t: np.ndarray) -> float:
    """Half the smallest decay -G(x, t, v_upper) over the grid; 0 when G is not negative there."""
    values = G(x[:, None], t[None, :], [np.full((1, 1), v) for v in v_upper])
    margin = float((-values).min())
    return H_FRACTION * margin if margin > 0 else 0.0


def build_reaction(cfg: NonlinearConfig, period: float, x: Optional[np.ndarray] = None,
                   t: Optional[np.ndarray] = None) -> ReactionSpec:
    """Compile G, its Jacobian and the sub/supersolution certificates from the [nonlinear] section."""
    n = len(cfg.G)
    if n == 0:
        raise ConfigError("G needs at least one component", key="nonlinear.G")
    for key, values in (("nonlinear.v_lower", cfg.v_lower), ("nonlinear.v_upper", cfg.v_upper)):
        if len(values) != n:
            raise ConfigError(f"expected {n} entries, got {len(values)}", key=key)
    q = state_symbols(n)
    G = [parse_expression(e, n, key=f"nonlinear.G[{i}]") for i, e in enumerate(cfg.G)]
    jac = [[sp.diff(g, qj) for qj in q] for g in G]

    lower = []
    for i, e in enumerate(cfg.v_lower):
        expr = parse_expression(e, key=f"nonlinear.v_lower[{i}]")
        if expr.free_symbols & {X}:
            raise ConfigError("v_lower may only depend on t", key=f"nonlinear.v_lower[{i}]")
        lower.append(expr)
    v_upper = np.asarray(cfg.v_upper, dtype=float)
    if not np.all(v_upper > 0):
        raise ConfigError("v_upper must be strictly positive", key="nonlinear.v_upper")

    spec = ReactionSpec(expressions=[str(g) for g in G], G=_vector_field(G, period, n),
                        jacobian=_matrix_field(jac, period, n), v_lower=_time_vector(lower, period),
                        v_lower_prime=_time_vector([sp.diff(e, T_VAR) for e in lower], period),
                        v_upper=v_upper, h=cfg.h if cfg.h is not None else 0.0)
    if cfg.h is None:
        if x is None or t is None:
            raise ConfigError("h not given and no grid to estimate it from", key="nonlinear.h")
        spec.h = _estimate_h(spec.G, v_upper, x, t)
        logger.debug("estimated decay margin h = %.6g", spec.h)
    return spec


def build_nonlinear_model(config: Union[ModelConfig, dict]) -> NonlinearModel:
    if isinstance(config, dict):
        config = parse_config(config)
    if config.nonlinear is None:
        raise ConfigError("missing [nonlinear] section", key="nonlinear")
    domain, tgrid = build_grids(config)
    reaction = build_reaction(config.nonlinear, tgrid.period, domain.nodes, tgrid.times)
    n = reaction.n
    model = NonlinearModel(domain=domain, tgrid=tgrid,
                           diffusion=build_diffusion(config.diffusion, n, domain, tgrid),
                           boundary=build_boundary(config.boundary, n, domain, tgrid),
                           reaction=reaction, label=config.label)
    logger.info("built nonlinear model: n=%d, n_x=%d, n_t=%d", n, domain.n_x, tgrid.n_t)
    return model


def _grid_states(x: np.ndarray, t: np.ndarray, values: np.ndarray) -> List[np.ndarray]:
    """Per-component state arrays broadcast to (len x, len t); values is (n,) or (n, len t)."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return [np.broadcast_to(v[None, :], (len(x), len(t))) for v in values]


def _offdiag_min(jac: np.ndarray) -> float:
    n = jac.shape[0]
    mask = ~np.eye(n, dtype=bool)
    return float(jac[mask].min()) if n > 1 else 0.0


def validate_reaction(model: NonlinearModel, sub_taus: Sequence[float] = SUB_TAUS,
                      super_taus: Sequence[float] = SUPER_TAUS) -> ReactionCheck:
    """Sampled cooperativity, subsolution and supersolution checks on the space-time grid.

    tau2 is the smallest probe from which every larger probe satisfies
    G(x, t, tau * v_upper) <= -h; tau1 is the largest subsolution probe
    that stays strictly below tau2 * v_upper.
    """
    spec = model.reaction
    x, t = model.domain.nodes, model.tgrid.times
    xx, tt = x[:, None], t[None, :]
    lower = spec.v_lower(t)
    lower_prime = spec.v_lower_prime(t)
    violations = []

    if np.any(lower <= 0):
        violations.append("v_lower must be strictly positive")

    probes = [tau * spec.v_upper for tau in (0.0,) + tuple(super_taus)]
    probes += [tau * lower for tau in sub_taus]
    worst = min(_offdiag_min(spec.jacobian(xx, tt, _grid_states(x, t, p))) for p in probes)
    h1_ok = worst >= 0.0
    if not h1_ok:
        violations.append(f"off-diagonal Jacobian entry {worst:.6g} < 0 on the probe set")

    h3_ok = not np.any(lower <= 0)
    for tau in sub_taus:
        rate = spec.G(xx, tt, _grid_states(x, t, tau * lower))
        slack = tau * lower_prime[:, None, :] - rate
        scale = 1e-12 * max(1.0, float(np.abs(rate).max()))
        if slack.max() > scale:
            i, node, k = np.unravel_index(np.argmax(slack), slack.shape)
            violations.append(f"subsolution fails at tau={tau:g}: component {i}, x={x[node]:.6g}, "
                              f"t={t[k]:.6g} (excess {slack.max():.3g})")
            h3_ok = False

    holds = []
    for tau in super_taus:
        rate = spec.G(xx, tt, _grid_states(x, t, tau * spec.v_upper))
        holds.append(bool(np.all(rate <= -spec.h)))
    tau2 = None
    for k, tau in enumerate(super_taus):
        if all(holds[k:]):
            tau2 = float(tau)
            break
    h4_ok = spec.h > 0 and tau2 is not None
    if not h4_ok:
        violations.append(f"supersolution fails: G(x, t, tau*v_upper) <= -h (h={spec.h:.6g}) "
                          f"not met on the probe ladder {tuple(super_taus)}")
        tau2 = float(super_taus[-1])

    below = [tau for tau in sub_taus if np.all(tau * lower < tau2 * spec.v_upper[:, None])]
    if below:
        tau1 = float(max(below))
    else:
        violations.append("no subsolution probe lies below the supersolution")
        h3_ok = False
        tau1 = float(sub_taus[0])

    spec.jacobian_offdiag_nonneg = h1_ok
    check = ReactionCheck(h1_ok=h1_ok, h3_ok=h3_ok, h4_ok=h4_ok, tau1=tau1, tau2=tau2, violations=violations)
    if check.ok:
        logger.info("reaction certificates hold: tau1=%g, tau2=%g, h=%.6g", tau1, tau2, spec.h)
    else:
        for v in violations:
            logger.warning("reaction check: %s", v)
    return check
