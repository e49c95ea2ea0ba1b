# src/r0/r0.py

"""Basic reproduction ratio by the sign of omega(Psi_mu), plus a next-generation oracle.

R0 - mu has the same sign as omega(Psi_mu), the growth bound of the system
with generator -V + F/mu (plus diffusion in the PDE setting), and omega is
nonincreasing in mu. R0 is therefore the root of a monotone function of
log(mu), found by bracketing and bisection.
"""

import logging
import math
from typing import Callable, List, Optional

import numpy as np
from scipy.linalg import expm

from ..discretize.stencil import n_unknowns, unknown_slice
from ..evolve.stepper import decay_generators, frozen_monodromies, growth_bounds, monodromy, resolve_boundary
from ..model.model import spatial_average
from ..spectral.spectral import spectral_radius
from ..types.errors import BracketError, ConfigError, ConvergenceError
from ..types.index import ModelSpec, PointwiseR0, R0Options, R0Result, R0Status, Setting
from ..utils.settings import get_settings

logger = logging.getLogger(__name__)


def _require_split(model: ModelSpec) -> None:
    if not model.is_split:
        raise ConfigError("model lacks split form", key="reaction.form")


def omega_psi(model: ModelSpec, mu: float, setting: Setting = Setting.PDE, bc=None,
              x_index: Optional[int] = None, settings=None) -> float:
    """Growth bound of the family with generator kappa*L - V + F/mu."""
    _require_split(model)
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    settings = settings or get_settings()
    model = resolve_boundary(model, bc)
    return float(_omega_function(model, Setting(setting), x_index, settings)(np.array([mu]), np.array([0]))[0])


def _omega_function(model: ModelSpec, setting: Setting, x_index, settings) -> Callable:
    """omega_fn(mu, idx) -> omega for a batch of probes; idx selects the problem."""
    period = model.tgrid.period
    if setting is Setting.FROZEN_X:
        nodes = np.arange(model.domain.n_nodes) if x_index is None else np.atleast_1d(x_index)

        def frozen(mu, idx):
            mats, logs, _ = frozen_monodromies(model, mu=mu, indices=nodes[idx], settings=settings)
            return growth_bounds(mats, logs, period, settings)

        return frozen

    warm = {"v": None}

    def single(mu, idx):
        out = np.empty(len(mu))
        for k, m in enumerate(mu):
            mono = monodromy(model, mu=float(m), setting=setting, settings=settings)
            result = spectral_radius(mono.matrix, tol=settings.power_tol, max_iters=settings.power_max_iters,
                                     v0=warm["v"] if setting is Setting.PDE else None)
            warm["v"] = result.vector
            out[k] = -np.inf if result.radius <= 0 else (math.log(result.radius) + mono.log_scale) / period
            logger.debug("omega(Psi_mu) at mu=%.10g: %.10g (%d iterations)", m, out[k], result.iterations)
        return out

    return single


def _bisect_log(omega_fn: Callable, size: int, opts: R0Options) -> List[dict]:
    """Bracket-and-bisect over log(mu) for `size` independent monotone problems."""
    traces = [[] for _ in range(size)]

    def probe(mu, idx):
        w = omega_fn(mu, idx)
        for i, m, o in zip(idx, mu, w):
            traces[i].append((float(m), float(o)))
        return w

    every = np.arange(size)
    lo = np.zeros(size)
    hi = np.full(size, np.inf)
    status = [R0Status.POSITIVE] * size
    mu = np.full(size, float(opts.mu_start))
    w = probe(mu, every)
    lo[w >= 0] = mu[w >= 0]
    hi[w <= 0] = mu[w <= 0]

    active = every[w > 0]
    while active.size:
        mu[active] *= 10.0
        over = mu[active] > opts.mu_max * (1 + 1e-9)
        for i in active[over]:
            status[i] = R0Status.BRACKET_FAILURE
        active = active[~over]
        if not active.size:
            break
        wa = probe(mu[active], active)
        hi[active[wa <= 0]] = mu[active[wa <= 0]]
        lo[active[wa >= 0]] = mu[active[wa >= 0]]
        active = active[wa > 0]

    active = every[w < 0]
    while active.size:
        mu[active] /= 10.0
        under = mu[active] < opts.mu_min * (1 - 1e-9)
        for i in active[under]:
            status[i] = R0Status.ZERO_CASE
        active = active[~under]
        if not active.size:
            break
        wa = probe(mu[active], active)
        lo[active[wa >= 0]] = mu[active[wa >= 0]]
        hi[active[wa <= 0]] = mu[active[wa <= 0]]
        active = active[wa < 0]

    positive = np.array([s is R0Status.POSITIVE for s in status], dtype=bool)
    active = every[positive & (hi > lo * (1 + opts.tol_mu))]
    while active.size:
        mid = np.sqrt(lo[active] * hi[active])
        wa = probe(mid, active)
        lo[active[wa >= 0]] = mid[wa >= 0]
        hi[active[wa <= 0]] = mid[wa <= 0]
        active = active[hi[active] > lo[active] * (1 + opts.tol_mu)]

    values = np.where(positive, np.sqrt(lo * np.where(np.isfinite(hi), hi, lo)), 0.0)
    final = np.zeros(size)
    idx = every[positive]
    if idx.size:
        final[idx] = probe(values[idx], idx)
    results = []
    for i in every:
        if status[i] is R0Status.ZERO_CASE:
            value, bracket, at_value = 0.0, (0.0, float(hi[i])), traces[i][-1][1]
        elif status[i] is R0Status.BRACKET_FAILURE:
            value, bracket, at_value = math.inf, (float(lo[i]), math.inf), traces[i][-1][1]
        else:
            value, bracket, at_value = float(values[i]), (float(lo[i]), float(hi[i])), float(final[i])
        results.append(dict(value=value, status=status[i], bracket=bracket, omega_trace=traces[i],
                            omega_at_value=at_value))
    return results


def _to_result(raw: dict, setting: Setting, bc) -> R0Result:
    return R0Result(value=raw["value"], status=raw["status"], bracket=raw["bracket"],
                    omega_trace=raw["omega_trace"], setting=setting, bc=bc,
                    omega_at_value=raw["omega_at_value"])


def r0_bisect(model: ModelSpec, setting: Setting = Setting.PDE, bc=None, opts: Optional[R0Options] = None,
              x_index: Optional[int] = None, settings=None) -> R0Result:
    """R0 as the root of omega(Psi_mu) = 0 over log(mu).

    Returns a zero_case result when omega stays negative down to mu_min and
    raises BracketError when it is still positive at mu_max.
    """
    _require_split(model)
    opts = opts or R0Options()
    if not 0 < opts.mu_min < opts.mu_max:
        raise ConfigError(f"need 0 < mu_min < mu_max, got {opts.mu_min}, {opts.mu_max}")
    settings = settings or get_settings()
    setting = Setting(setting)
    model = resolve_boundary(model, bc)
    if setting is Setting.FROZEN_X and x_index is None:
        raise ValueError("frozen_x R0 needs an x index; use r0_pointwise_max for the whole grid")
    raw = _bisect_log(_omega_function(model, setting, x_index, settings), 1, opts)[0]
    kind = model.boundary.kind if setting is Setting.PDE else None
    if raw["status"] is R0Status.BRACKET_FAILURE:
        raise BracketError(f"omega(Psi_mu) > 0 at mu_max = {opts.mu_max:g}; omega of the decay system "
                           f"is probably nonnegative ({setting.value})")
    result = _to_result(raw, setting, kind)
    logger.info("R0 (%s%s) = %.10g [%s]", setting.value, f", {kind.value}" if kind else "", result.value,
                result.status.value)
    return result


def r0_pointwise_max(model: ModelSpec, opts: Optional[R0Options] = None, settings=None) -> PointwiseR0:
    """Frozen-x R0 at every grid node (boundary included) and its maximum."""
    _require_split(model)
    opts = opts or R0Options()
    settings = settings or get_settings()
    size = model.domain.n_nodes
    raws = _bisect_log(_omega_function(model, Setting.FROZEN_X, None, settings), size, opts)
    failed = [i for i, r in enumerate(raws) if r["status"] is R0Status.BRACKET_FAILURE]
    if failed:
        raise BracketError(f"frozen-x bracket failed at nodes {failed[:5]}")
    values = np.array([r["value"] for r in raws])
    argmax = int(np.argmax(values))
    x = float(model.domain.nodes[argmax])
    logger.info("max_x R0(x) = %.10g at x = %.6g", values[argmax], x)
    return PointwiseR0(max_value=float(values[argmax]), argmax=argmax, x_argmax=x, values=values,
                       statuses=[r["status"] for r in raws])


def r0_averaged(model: ModelSpec, opts: Optional[R0Options] = None, settings=None) -> R0Result:
    """R0 of the spatially averaged ODE system."""
    return r0_bisect(model, setting=Setting.AVERAGED, opts=opts, settings=settings)


def _decay_and_infection(model: ModelSpec, setting: Setting, x_index):
    """Dense decay generators A_k (n_t, d, d) and infection matrices F_k (n_t, d, d)."""
    n_t = model.tgrid.n_t
    if setting is Setting.PDE:
        decay = decay_generators(model)
        F = model.F.samples[:, :, unknown_slice(model.boundary.kind), :]
        infection = np.zeros_like(decay)
        for j in range(n_unknowns(model.domain, model.boundary.kind)):
            block = slice(j * model.n, (j + 1) * model.n)
            infection[:, block, block] = np.moveaxis(F[:, :, j, :], -1, 0)
        return decay, infection
    if setting is Setting.AVERAGED:
        V = spatial_average(model.V, model.domain)
        F = spatial_average(model.F, model.domain)
    else:
        if x_index is None:
            raise ValueError("frozen_x oracle needs an x index")
        V = model.V.samples[:, :, x_index, :]
        F = model.F.samples[:, :, x_index, :]
    return np.moveaxis(-V, -1, 0), np.moveaxis(F, -1, 0)


def r0_direct(model: ModelSpec, setting: Setting = Setting.AVERAGED, x_index: Optional[int] = None,
              tol_tail: float = 1e-12, k_max: int = 100000, settings=None) -> float:
    """Spectral radius of the discretized next-generation operator on periodic grid functions.

    [Lu](t_k) = dt * sum_q w_q Phi(t_k, t_k - q dt) F u(t_k - q dt) with trapezoid
    weights in s; the sum over whole periods is the geometric series in the
    period map M_j, truncated at K periods with r(M)^K <= tol_tail (1 - r(M)).
    """
    _require_split(model)
    settings = settings or get_settings()
    setting = Setting(setting)
    decay, infection = _decay_and_infection(model, setting, x_index)
    n_t, d = decay.shape[0], decay.shape[1]
    dt = model.tgrid.dt
    if not np.any(infection):
        return 0.0
    steps = np.array([expm(0.5 * dt * (decay[k] + decay[(k + 1) % n_t])) for k in range(n_t)])
    steps = np.where(steps < 0, 0.0, steps)

    eye = np.eye(d)
    Q = np.broadcast_to(eye, (n_t, d, d)).copy()
    starts = np.arange(n_t)
    propagators = np.empty((n_t, n_t, d, d))  # [m, j]
    for m in range(n_t):
        propagators[m] = Q
        Q = steps[(starts + m) % n_t] @ Q
    period_maps = Q

    r = spectral_radius(period_maps[0], tol=settings.power_tol).radius
    if r >= 1.0:
        raise ConvergenceError(f"period map of the decay system has r = {r:.6g} >= 1; tail does not converge")
    K = 1 if r == 0 else max(1, math.ceil(math.log(tol_tail * (1 - r)) / math.log(r)))
    if K > k_max:
        raise ConvergenceError(f"tail needs {K} periods (cap {k_max}) for r = {r:.6g}")
    tail = np.linalg.solve(eye - period_maps, eye - np.linalg.matrix_power(period_maps, K))
    logger.debug("next-generation tail: r = %.6g, K = %d", r, K)

    operator = np.zeros((n_t * d, n_t * d))
    blocks = operator.reshape(n_t, d, n_t, d)
    for m in range(n_t):
        weight = tail - (0.5 * eye if m == 0 else 0.0)
        # block (k, j) with k = j + m mod n_t
        blocks[(starts + m) % n_t, :, starts, :] = dt * propagators[m] @ weight @ infection
    operator = np.where(operator < 0, 0.0, operator)
    value = spectral_radius(operator, tol=settings.power_tol, max_iters=settings.power_max_iters).radius
    logger.info("R0 by next-generation operator (%s): %.10g", setting.value, value)
    return float(value)


def r0_autonomous(V: np.ndarray, F: np.ndarray) -> float:
    """r(F V^-1) for constant matrices."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    product = F @ np.linalg.inv(V)
    return spectral_radius(np.where(product < 0, 0.0, product)).radius
