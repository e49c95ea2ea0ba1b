# src/model/model.py

import logging
import math
from dataclasses import replace
from typing import List, Optional, Sequence, Union

import numpy as np

from ..data.expressions import sample_field, sample_matrix
from ..data.loader import BoundaryConfig, DiffusionConfig, ModelConfig, parse_config
from ..discretize.stencil import trapezoid_average
from ..evolve.stepper import frozen_monodromies, growth_bounds, monodromy
from ..spectral.spectral import spectral_radius
from ..types.errors import ConfigError, StepError
from ..types.index import (AssumptionReport, BoundaryKind, BoundarySpec, CoefficientField, DiffusionSpec,
                           Domain, ModelSpec, Setting, TimeGrid, Violation)
from ..utils.settings import get_settings

logger = logging.getLogger(__name__)

STEP_BOUND = 0.5


def _broadcast(values: Optional[Sequence], n: int, default, key: str) -> List:
    if values is None:
        return [default] * n
    if len(values) == 1:
        return list(values) * n
    if len(values) != n:
        raise ConfigError(f"expected {n} entries, got {len(values)}", key=key)
    return list(values)


def build_grids(config: ModelConfig):
    return (Domain(config.domain.x_lo, config.domain.x_hi, config.domain.n_x),
            TimeGrid(config.time.period, config.time.n_t))


def build_diffusion(cfg: Optional[DiffusionConfig], n: int, domain: Domain, tgrid: TimeGrid) -> DiffusionSpec:
    if cfg is None:
        raise ConfigError("missing [diffusion] section", key="diffusion")
    kappa = np.array(_broadcast(cfg.kappa, n, None, "diffusion.kappa"), dtype=float)
    exprs = _broadcast(cfg.a, n, "1", "diffusion.a")
    a = np.array([sample_field(e, domain.nodes, tgrid.times, tgrid.period, key=f"diffusion.a[{i}]")
                  for i, e in enumerate(exprs)])[:, None]
    if not np.all(a > 0):
        raise ConfigError("diffusion field a must be strictly positive", key="diffusion.a")
    return DiffusionSpec(kappa=kappa, a=CoefficientField(a, tgrid.period))


def build_boundary(cfg: BoundaryConfig, n: int, domain: Domain, tgrid: TimeGrid) -> BoundarySpec:
    kind = BoundaryKind(cfg.kind)
    if kind is not BoundaryKind.ROBIN:
        return BoundarySpec(kind)
    ends = np.array([domain.x_lo, domain.x_hi])
    b = np.array([sample_field(e, ends, tgrid.times, tgrid.period, key=f"boundary.b[{i}]")
                  for i, e in enumerate(_broadcast(cfg.b, n, None, "boundary.b"))])
    return BoundarySpec(kind, robin_b=b)


def _square(entries, key: str) -> int:
    n = len(entries)
    if n == 0 or any(len(row) != n for row in entries):
        raise ConfigError(f"expected a square table of expressions, got {[len(r) for r in entries]}", key=key)
    return n


def check_step_bound(reaction: np.ndarray, tgrid: TimeGrid) -> None:
    """Refuse grids with dt * max|diagonal reaction| > 0.5; suggests an n_t that passes."""
    diag = np.abs(np.einsum("iixt->ixt", reaction)).max()
    if diag * tgrid.dt > STEP_BOUND:
        suggested = math.ceil(tgrid.period * diag / STEP_BOUND)
        raise ConfigError(f"dt = {tgrid.dt:.4g} too large for max |diagonal reaction| = {diag:.4g}; "
                          f"use n_t >= {suggested}", key="time.n_t")


def build_model(config: Union[ModelConfig, dict]) -> ModelSpec:
    """Sample every field of a validated config on the space-time grid."""
    if isinstance(config, dict):
        config = parse_config(config)
    if config.reaction is None:
        raise ConfigError("missing [reaction] section", key="reaction")
    domain, tgrid = build_grids(config)
    x, t, T = domain.nodes, tgrid.times, tgrid.period
    reaction = config.reaction
    fields = {}
    if reaction.form == "combined":
        n = _square(reaction.entries, "reaction.entries")
        fields["M"] = CoefficientField(sample_matrix(reaction.entries, x, t, T, "reaction.entries"), T)
        generator = fields["M"].samples
    else:
        n = _square(reaction.V, "reaction.V")
        if _square(reaction.F, "reaction.F") != n:
            raise ConfigError("V and F must have the same size", key="reaction.F")
        fields["V"] = CoefficientField(sample_matrix(reaction.V, x, t, T, "reaction.V"), T)
        fields["F"] = CoefficientField(sample_matrix(reaction.F, x, t, T, "reaction.F"), T)
        generator = -fields["V"].samples + fields["F"].samples
    check_step_bound(generator, tgrid)
    model = ModelSpec(domain=domain, tgrid=tgrid,
                      diffusion=build_diffusion(config.diffusion, n, domain, tgrid),
                      boundary=build_boundary(config.boundary, n, domain, tgrid),
                      label=config.label, **fields)
    logger.info("built %s model: n=%d, n_x=%d, n_t=%d, %s boundary", "split" if model.is_split else "combined",
                n, domain.n_x, tgrid.n_t, model.boundary.kind.value)
    return model


def spatial_average(field: Union[CoefficientField, np.ndarray], domain: Domain) -> np.ndarray:
    """|Omega|^-1 * integral over x by the composite trapezoid rule; shape (n, m, n_t)."""
    samples = field.samples if isinstance(field, CoefficientField) else np.asarray(field)
    if samples.shape[-2] != domain.n_nodes:
        raise ConfigError(f"field has {samples.shape[-2]} nodes, domain has {domain.n_nodes}")
    return trapezoid_average(samples, domain)


def averaged_model(model: ModelSpec) -> ModelSpec:
    """Same model with every reaction field replaced by its spatial average (constant in x)."""
    def flat(fld):
        if fld is None:
            return None
        avg = spatial_average(fld, model.domain)[:, :, None, :]
        return CoefficientField(np.broadcast_to(avg, fld.shape).copy(), fld.period)

    return replace(model, M=flat(model.M), V=flat(model.V), F=flat(model.F))


def _sign_violations(samples: np.ndarray, name: str, offdiag_only: bool, model: ModelSpec) -> List[Violation]:
    """Worst negative sample of each offending entry."""
    out = []
    n = samples.shape[0]
    x, t = model.domain.nodes, model.tgrid.times
    for i in range(n):
        for j in range(n):
            if offdiag_only and i == j:
                continue
            block = samples[i, j]
            if block.min() < 0:
                node, k = np.unravel_index(np.argmin(block), block.shape)
                out.append(Violation(name, (i, j), int(node), int(k), float(x[node]), float(t[k]),
                                     float(block[node, k])))
    return out


def _growth(matrix: np.ndarray, log_scale: float, period: float) -> float:
    """omega for possibly non-positive maps (falls back to the full spectrum)."""
    if np.all(matrix >= 0):
        r = spectral_radius(matrix).radius
    else:
        r = float(np.abs(np.linalg.eigvals(matrix)).max())
    return -np.inf if r <= 0 else (math.log(r) + log_scale) / period


def validate_assumptions(model: ModelSpec, settings=None) -> AssumptionReport:
    """Sign checks on every sample plus omega of the decay systems Gamma_x and Gamma~."""
    settings = settings or get_settings()
    if model.is_split:
        violations = _sign_violations(-model.V.samples, "cooperative(-V)", True, model)
        cooperative_ok = not violations
        f_violations = _sign_violations(model.F.samples, "F >= 0", False, model)
        violations += f_violations
    else:
        violations = _sign_violations(model.M.samples, "cooperative(M)", True, model)
        cooperative_ok = not violations
        f_violations = []

    omega_max = argmax = omega_tilde = None
    gamma_ok = tilde_ok = True
    if model.is_split:
        period = model.tgrid.period
        try:
            mats, logs, _ = frozen_monodromies(model, infection=False, settings=settings)
            if cooperative_ok:
                omegas = growth_bounds(mats, logs, period, settings)
            else:
                omegas = np.array([_growth(m, s, period) for m, s in zip(mats, logs)])
            argmax = int(np.argmax(omegas))
            omega_max = float(omegas[argmax])
            averaged = monodromy(model, setting=Setting.AVERAGED, infection=False, settings=settings)
            omega_tilde = _growth(averaged.matrix, averaged.log_scale, period)
            gamma_ok, tilde_ok = omega_max < 0, omega_tilde < 0
            logger.debug("omega(Gamma_x) max %.6g at node %d, omega(Gamma~) %.6g", omega_max, argmax, omega_tilde)
        except StepError as e:
            logger.warning("decay system could not be stepped: %s", e)
            gamma_ok = tilde_ok = False
    report = AssumptionReport(cooperative_ok=cooperative_ok, F_nonneg_ok=not f_violations,
                              omega_Gamma_negative=gamma_ok, omega_Gamma_max=omega_max,
                              omega_Gamma_argmax=argmax, omega_Gamma_tilde_negative=tilde_ok,
                              omega_Gamma_tilde=omega_tilde, violations=violations)
    if report.ok:
        logger.info("all standing assumptions hold")
    else:
        logger.warning("assumption check failed: %d sign violations, omega flags (%s, %s)",
                       len(violations), gamma_ok, tilde_ok)
    return report


def perturb(model: ModelSpec, delta: float, seed: int = 0) -> ModelSpec:
    """Scale every reaction and diffusion sample by 1 + delta*xi, xi uniform in [-1, 1]."""
    rng = np.random.default_rng(seed)

    def jitter(fld):
        if fld is None:
            return None
        return CoefficientField(fld.samples * (1.0 + delta * rng.uniform(-1.0, 1.0, fld.shape)), fld.period)

    diffusion = replace(model.diffusion, a=jitter(model.diffusion.a))
    return replace(model, diffusion=diffusion, M=jitter(model.M), V=jitter(model.V), F=jitter(model.F))
