# src/evolve/stepper.py

"""Backward-Euler stepping of linear periodic systems and their period maps.

One step from t_k to t_{k+1} solves (I - dt*A(t_{k+1})) u_new = u_old. When
the step matrix is not a nonsingular M-matrix (checked by B z = 1 having a
positive solution) the step is split into 2^p equal substeps with the same
A(t_{k+1}). Period maps are stored as exp(log_scale) * matrix so that
large growth or decay never overflows.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from ..discretize.stencil import diffusion_bands, n_unknowns, trapezoid_average, unknown_slice
from ..spectral.spectral import spectral_radii, spectral_radius
from ..types.errors import ConfigError, StepError
from ..types.index import BoundaryKind, BoundarySpec, ModelSpec, MonodromyMap, Setting
from ..utils.settings import get_settings

logger = logging.getLogger(__name__)

MAX_REFINE = 16
_BIG, _SMALL = 1e100, 1e-100


def _mu_factor(mu) -> np.ndarray:
    if mu is None:
        return np.ones(1)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if np.any(mu <= 0):
        raise ValueError(f"mu must be positive, got {mu}")
    return 1.0 / mu


def _reaction(model: ModelSpec, infection: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """(base, infection) reaction samples; the generator is base + F/mu."""
    if model.M is not None:
        return model.M.samples, None
    return -model.V.samples, (model.F.samples if infection else None)


class _OdeEngine:
    """A batch of independent n x n periodic ODE systems."""

    def __init__(self, base: np.ndarray, infection: Optional[np.ndarray], mu, dt: float):
        # base/infection: (B, n, n, n_t)
        gen = base
        if infection is not None:
            gen = base + infection * _mu_factor(mu).reshape(-1, 1, 1, 1)
        self.gen = gen
        self.dt = dt
        self.batch, self.n = gen.shape[0], gen.shape[1]
        self.n_t = gen.shape[-1]

    def step_matrices(self, k: int, min_refine: int = 0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Step maps as exp(log_factor) * matrix, with the substep count per system."""
        A = self.gen[..., (k + 1) % self.n_t]
        eye = np.eye(self.n)
        result = np.empty_like(A)
        refine = np.zeros(self.batch, dtype=int)
        log_factor = np.zeros(self.batch)
        pending = np.arange(self.batch)
        ones = np.ones((self.batch, self.n, 1))
        for p in range(min_refine, MAX_REFINE + 1):
            tau = self.dt / 2 ** p
            B = eye - tau * A[pending]
            try:
                z = np.linalg.solve(B, ones[: len(pending)])[..., 0]
            except LinAlgError:
                continue
            ok = np.all(z > 0, axis=1)
            if ok.any():
                inv = np.linalg.inv(B[ok])
                logs = np.zeros(len(inv))
                for _ in range(p):
                    inv = inv @ inv
                    peak = np.abs(inv).max(axis=(1, 2))
                    inv /= peak[:, None, None]
                    logs = 2.0 * logs + np.log(peak)
                result[pending[ok]] = inv
                log_factor[pending[ok]] = logs
                refine[pending[ok]] = p
                if p:
                    logger.debug("step %d: %d systems refined to 2^%d substeps", k, ok.sum(), p)
            pending = pending[~ok]
            if not len(pending):
                return result, refine, log_factor
        raise StepError(f"step matrix is not an M-matrix after 2^{MAX_REFINE} substeps", k)

    def advance(self, k: int, U: np.ndarray, min_refine: int = 0):
        S, refine, log_factor = self.step_matrices(k, min_refine)
        return S @ U, refine, log_factor


class _PdeEngine:
    """Full reaction-diffusion system on the unknown nodes, node-major layout."""

    def __init__(self, model: ModelSpec, base: np.ndarray, infection: Optional[np.ndarray], mu):
        kind = model.boundary.kind
        self.n = model.n
        self.n_t = model.tgrid.n_t
        self.dt = model.tgrid.dt
        self.n_nodes = n_unknowns(model.domain, kind)
        self.size = self.n * self.n_nodes
        sl = unknown_slice(kind)
        gen = base[:, :, sl, :]
        if infection is not None:
            gen = gen + infection[:, :, sl, :] * _mu_factor(mu)[0]
        self.gen = gen
        a_nodes = np.transpose(model.diffusion.a.samples[:, 0], (0, 2, 1))
        b = None
        if kind is BoundaryKind.ROBIN:
            b = np.transpose(model.boundary.robin_b, (0, 2, 1))
        lower, diag, upper = diffusion_bands(a_nodes, model.domain.h, kind, b)
        kappa = model.diffusion.kappa[:, None, None]
        self.lower, self.diag, self.upper = kappa * lower, kappa * diag, kappa * upper

    def bands(self, k: int) -> np.ndarray:
        """Generator A(t_k) in LAPACK banded storage with n sub- and superdiagonals."""
        n = self.n
        ab = np.zeros((2 * n + 1, self.size))
        G = self.gen[..., k]
        for i in range(n):
            for l in range(n):
                ab[n + i - l, l::n] += G[i, l]
            ab[n, i::n] += self.diag[i, k]
            ab[0, n + i::n] = self.upper[i, k]
            ab[2 * n, i:(self.n_nodes - 1) * n:n] = self.lower[i, k]
        return ab

    def dense(self, k: int) -> np.ndarray:
        ab = self.bands(k)
        n = self.n
        A = np.zeros((self.size, self.size))
        for offset in range(-n, n + 1):
            row = ab[n - offset]
            if offset >= 0:
                A += np.diag(row[offset:], offset)
            else:
                A += np.diag(row[: offset], offset)
        return A

    def advance(self, k: int, U: np.ndarray, min_refine: int = 0):
        kk = (k + 1) % self.n_t
        ab = self.bands(kk)
        n = self.n
        rhs = np.hstack([np.ones((self.size, 1)), U])
        for p in range(min_refine, MAX_REFINE + 1):
            tau = self.dt / 2 ** p
            B = -tau * ab
            B[n] += 1.0
            try:
                out = solve_banded((n, n), B, rhs, check_finite=False)
            except (LinAlgError, ValueError):
                continue
            if np.all(out[:, 0] > 0):
                log_factor = 0.0
                for _ in range(2 ** p - 1):
                    out = solve_banded((n, n), B, out, check_finite=False)
                    peak = np.abs(out).max()
                    if peak > _BIG:
                        out /= peak
                        log_factor += np.log(peak)
                if p:
                    logger.debug("step %d refined to 2^%d substeps", k, p)
                return out[:, 1:], np.array([p]), np.array([log_factor])
        raise StepError(f"step matrix is not an M-matrix after 2^{MAX_REFINE} substeps", k)


def resolve_boundary(model: ModelSpec, bc) -> ModelSpec:
    if bc is None:
        return model
    if isinstance(bc, BoundarySpec):
        return model.with_boundary(bc)
    kind = BoundaryKind(bc)
    if kind is model.boundary.kind:
        return model
    if kind is BoundaryKind.ROBIN:
        raise ConfigError("robin boundary needs b", key="boundary.b")
    return model.with_boundary(BoundarySpec(kind))


def _ode_samples(model: ModelSpec, setting: Setting, x_index, infection: bool):
    """(B, n, n, n_t) base and infection samples for the ODE settings."""
    base, inf = _reaction(model, infection)
    if setting is Setting.AVERAGED:
        base = trapezoid_average(base, model.domain)[None]
        inf = None if inf is None else trapezoid_average(inf, model.domain)[None]
        return base, inf
    if x_index is None:
        idx = np.arange(model.domain.n_nodes)
    else:
        idx = np.atleast_1d(x_index)
        if np.any((idx < 0) | (idx >= model.domain.n_nodes)):
            raise IndexError(f"x index {x_index} outside 0..{model.domain.n_nodes - 1}")
    base = np.moveaxis(base[:, :, idx, :], 2, 0)
    inf = None if inf is None else np.moveaxis(inf[:, :, idx, :], 2, 0)
    return base, inf


def _engine(model, setting, mu, x_index, infection):
    if setting is Setting.PDE:
        base, inf = _reaction(model, infection)
        return _PdeEngine(model, base, inf, mu)
    base, inf = _ode_samples(model, setting, x_index, infection)
    return _OdeEngine(base, inf, mu, model.tgrid.dt)


def _clamp(matrix: np.ndarray, eps: float, label: str) -> int:
    """Zero the round-off negatives of a positive map in place; returns how many."""
    scale = np.abs(matrix).max(axis=(-2, -1), keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    tiny = (matrix < 0) & (matrix > -eps * scale)
    count = int(tiny.sum())
    matrix[tiny] = 0.0
    large = int((matrix < 0).sum())
    if large:
        logger.warning("%s: %d entries below -eps_pos kept (generator not cooperative?)", label, large)
    if count:
        logger.debug("%s: clamped %d round-off negatives", label, count)
    return count


def _propagate(engine, U: np.ndarray, n_t: int, min_refine=None):
    """March U over one period; returns (U, log_scale, refine per step)."""
    log_scale = np.zeros(U.shape[0] if U.ndim == 3 else 1)
    refine = np.zeros(n_t, dtype=int)
    for k in range(n_t):
        forced = 0 if min_refine is None else int(min_refine[k])
        U, p, step_log = engine.advance(k, U, forced)
        refine[k] = int(p.max())
        log_scale += step_log
        peak = np.abs(U).max(axis=tuple(range(1, U.ndim))) if U.ndim == 3 else np.atleast_1d(np.abs(U).max())
        rescale = (peak > _BIG) | ((peak < _SMALL) & (peak > 0))
        if rescale.any():
            factor = np.where(rescale, peak, 1.0)
            U = U / (factor[:, None, None] if U.ndim == 3 else factor[0])
            log_scale += np.log(factor)
    return U, log_scale, refine


def step_linear(state: np.ndarray, time_index: int, model: ModelSpec, mu: Optional[float] = None,
                setting: Setting = Setting.PDE, x_index: Optional[int] = None, bc=None) -> np.ndarray:
    """One backward-Euler step from t_k to t_{k+1} of a single state vector."""
    model = resolve_boundary(model, bc)
    setting = Setting(setting)
    if setting is Setting.FROZEN_X and x_index is None:
        raise ValueError("frozen_x stepping needs an x index")
    engine = _engine(model, setting, mu, x_index, infection=True)
    state = np.asarray(state, dtype=float)
    if setting is Setting.PDE:
        out, _, log_factor = engine.advance(time_index, state.reshape(-1, 1))
        return out[:, 0] * np.exp(log_factor[0])
    out, _, log_factor = engine.advance(time_index, state.reshape(1, -1, 1))
    return out[0, :, 0] * np.exp(log_factor[0])


def monodromy(model: ModelSpec, mu: Optional[float] = None, setting: Setting = Setting.PDE,
              x_index: Optional[int] = None, bc=None, infection: bool = True,
              min_refine: Optional[np.ndarray] = None, settings=None) -> MonodromyMap:
    """Period map U(T, 0) assembled by propagating every basis vector."""
    settings = settings or get_settings()
    model = resolve_boundary(model, bc)
    setting = Setting(setting)
    if setting is Setting.FROZEN_X and x_index is None:
        raise ValueError("frozen_x monodromy needs an x index; use frozen_monodromies for the whole grid")
    engine = _engine(model, setting, mu, x_index, infection)
    n_t = model.tgrid.n_t
    if setting is Setting.PDE:
        U, log_scale, refine = _propagate(engine, np.eye(engine.size), n_t, min_refine)
        matrix = U
    else:
        U, log_scale, refine = _propagate(engine, np.broadcast_to(np.eye(model.n), (1, model.n, model.n)).copy(),
                                          n_t, min_refine)
        matrix = U[0]
    clamped = _clamp(matrix, settings.eps_pos, f"monodromy[{setting.value}]")
    return MonodromyMap(matrix=matrix, period=model.tgrid.period, setting=setting,
                        bc=model.boundary.kind if setting is Setting.PDE else None,
                        x_index=x_index, mu=mu, clamp_count=clamped, log_scale=float(log_scale[0]),
                        max_substeps=int(2 ** refine.max()), refinements=refine)


def frozen_monodromies(model: ModelSpec, mu=None, indices: Optional[np.ndarray] = None,
                       infection: bool = True, settings=None):
    """Frozen-x period maps for a batch of grid nodes.

    mu may be a scalar or one value per node. Returns (matrices (B, n, n),
    log_scales (B,), clamp count).
    """
    settings = settings or get_settings()
    base, inf = _ode_samples(model, Setting.FROZEN_X, indices, infection)
    engine = _OdeEngine(base, inf, mu, model.tgrid.dt)
    eye = np.broadcast_to(np.eye(model.n), (engine.batch, model.n, model.n)).copy()
    U, log_scale, _ = _propagate(engine, eye, model.tgrid.n_t)
    clamped = _clamp(U, settings.eps_pos, "monodromy[frozen_x]")
    return U, log_scale, clamped


def trajectory(model: ModelSpec, v0: np.ndarray, mu: Optional[float] = None,
               setting: Setting = Setting.PDE, x_index: Optional[int] = None,
               refinements: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """States U(t_k, 0) v0 for k = 0..n_t-1 as (n_t, size) plus their log scales."""
    setting = Setting(setting)
    engine = _engine(model, setting, mu, x_index, infection=True)
    n_t = model.tgrid.n_t
    u = np.asarray(v0, dtype=float).reshape(-1, 1)
    if setting is not Setting.PDE:
        u = u.reshape(1, -1, 1)
    states = np.zeros((n_t, u.size))
    logs = np.zeros(n_t)
    log_scale = 0.0
    for k in range(n_t):
        states[k] = u.ravel()
        logs[k] = log_scale
        forced = 0 if refinements is None else int(refinements[k])
        u, _, step_log = engine.advance(k, u, forced)
        log_scale += float(step_log[0])
        peak = np.abs(u).max()
        if peak > 0:
            u = u / peak
            log_scale += np.log(peak)
    return states, logs


def growth_bound(mono: MonodromyMap, settings=None) -> float:
    """omega = ln r(U(T,0)) / T; -inf when the spectral radius is 0."""
    settings = settings or get_settings()
    result = spectral_radius(mono.matrix, tol=settings.power_tol, max_iters=settings.power_max_iters)
    if result.radius <= 0:
        return -np.inf
    return (np.log(result.radius) + mono.log_scale) / mono.period


def growth_bounds(matrices: np.ndarray, log_scales: np.ndarray, period: float, settings=None) -> np.ndarray:
    """Vectorized growth bounds for a batch of small period maps."""
    settings = settings or get_settings()
    radii = spectral_radii(matrices, tol=settings.power_tol, max_iters=settings.power_max_iters)
    with np.errstate(divide="ignore"):
        return (np.log(radii) + log_scales) / period


def dense_generator(model: ModelSpec, time_index: int, mu: Optional[float] = None, bc=None) -> np.ndarray:
    """Dense PDE generator A(t_k) over the unknowns, for tests and small oracles."""
    model = resolve_boundary(model, bc)
    base, inf = _reaction(model, True)
    return _PdeEngine(model, base, inf, mu).dense(time_index)


def decay_generators(model: ModelSpec, bc=None) -> np.ndarray:
    """Dense kappa*L - V over the unknowns at every time node, shape (n_t, size, size)."""
    model = resolve_boundary(model, bc)
    engine = _PdeEngine(model, -model.V.samples, None, None)
    return np.array([engine.dense(k) for k in range(model.tgrid.n_t)])
