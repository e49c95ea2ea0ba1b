# src/spectral/eigen.py

import logging
from dataclasses import replace
from typing import Optional, Tuple

import numpy as np

from ..discretize.stencil import unknown_slice
from ..evolve.stepper import resolve_boundary, frozen_monodromies, growth_bounds, monodromy, trajectory
from ..types.index import (BoundaryKind, CoefficientField, ModelSpec, PrincipalEigenvalue, Setting)
from ..utils.settings import get_settings
from .spectral import spectral_radius

logger = logging.getLogger(__name__)


def _eigenfunction(model: ModelSpec, vector: np.ndarray, lambda_star: float, setting: Setting,
                   x_index: Optional[int], refinements) -> np.ndarray:
    """phi(t_k) = exp(lambda* t_k) U(t_k, 0) v on the full node grid, max-normalized."""
    states, logs = trajectory(model, vector, setting=setting, x_index=x_index, refinements=refinements)
    exponent = logs + lambda_star * model.tgrid.times
    weights = np.exp(exponent - exponent.max())
    states = states * weights[:, None]
    n, n_t = model.n, model.tgrid.n_t
    if setting is not Setting.PDE:
        phi = states.T.reshape(n, 1, n_t)
    else:
        # node-major: index j*n + i
        phi = np.zeros((n, model.domain.n_nodes, n_t))
        phi[:, unknown_slice(model.boundary.kind), :] = states.reshape(n_t, -1, n).transpose(2, 1, 0)
    phi = np.where(phi < 0, 0.0, phi)
    peak = phi.max()
    return phi / peak if peak > 0 else phi


def principal_eigenvalue(model: ModelSpec, bc=None, setting: Setting = Setting.PDE,
                         x_index: Optional[int] = None, settings=None) -> PrincipalEigenvalue:
    """lambda* = -omega(U) of the periodic parabolic problem (or of an ODE setting)."""
    settings = settings or get_settings()
    model = resolve_boundary(model, bc)
    setting = Setting(setting)
    mono = monodromy(model, setting=setting, x_index=x_index, settings=settings)
    result = spectral_radius(mono.matrix, tol=settings.power_tol, max_iters=settings.power_max_iters)
    if result.radius <= 0:
        lambda_star = np.inf
    else:
        lambda_star = -(np.log(result.radius) + mono.log_scale) / mono.period
    phi = _eigenfunction(model, result.vector, lambda_star if np.isfinite(lambda_star) else 0.0,
                         setting, x_index, mono.refinements)
    logger.info("principal eigenvalue (%s, %s): %.10g", setting.value,
                model.boundary.kind.value if setting is Setting.PDE else "-", lambda_star)
    return PrincipalEigenvalue(lambda_star=float(lambda_star),
                               bc=model.boundary.kind if setting is Setting.PDE else None,
                               kappa=model.diffusion.kappa.copy(), eigenfunction=phi,
                               diagnostics=result, setting=setting)


def eta(model: ModelSpec, settings=None) -> Tuple[float, float, int]:
    """(eta, eta_tilde, argmax): max_x omega(O_x) and omega of the averaged system."""
    settings = settings or get_settings()
    mats, logs, _ = frozen_monodromies(model, settings=settings)
    omegas = growth_bounds(mats, logs, model.tgrid.period, settings)
    argmax = int(np.argmax(omegas))
    averaged = principal_eigenvalue(model, setting=Setting.AVERAGED, settings=settings)
    return float(omegas[argmax]), -averaged.lambda_star, argmax


def shift_reaction(model: ModelSpec, c0: float) -> ModelSpec:
    """Model with M + c0*I (or V - c0*I for the split form)."""
    eye = np.eye(model.n)[:, :, None, None]
    if model.M is not None:
        return replace(model, M=CoefficientField(model.M.samples + c0 * eye, model.M.period))
    return replace(model, V=CoefficientField(model.V.samples - c0 * eye, model.V.period))


def first_diffusion_eigenvalue(model: ModelSpec, kappa: float = 1.0, settings=None) -> float:
    """Principal eigenvalue of -kappa*L alone, same boundary; mu_1 * kappa in the continuum."""
    zero = CoefficientField(np.zeros_like(model.generator()), model.tgrid.period)
    bare = replace(model, M=zero, V=None, F=None).with_kappa(kappa)
    return principal_eigenvalue(bare, settings=settings).lambda_star


def reaction_bound(model: ModelSpec) -> float:
    """m-bar: the largest reaction entry, floored at 0."""
    return max(float(model.generator().max()), 0.0)


def blowup_lower_bound(model: ModelSpec, diffusion_eigenvalue: float) -> float:
    """lambda* >= mu_1*kappa - n*m_bar, with mu_1*kappa taken from first_diffusion_eigenvalue."""
    if model.boundary.kind is BoundaryKind.NEUMANN:
        raise ValueError("the mu_1*kappa - n*m_bar bound applies to Dirichlet and Robin only")
    return diffusion_eigenvalue - model.n * reaction_bound(model)
