# src/discretize/stencil.py

import numpy as np
from scipy.integrate import trapezoid

from ..types.index import BandedOperator, BoundaryKind, Domain, ModelSpec


def trapezoid_average(samples: np.ndarray, domain: Domain, axis: int = -2) -> np.ndarray:
    """Composite trapezoid mean over the node axis (boundary nodes included)."""
    return trapezoid(samples, dx=domain.h, axis=axis) / domain.length


def face_values(a_nodes: np.ndarray) -> np.ndarray:
    """a at x_{j+1/2}, midpoint average of the nodal samples along the last axis."""
    return 0.5 * (a_nodes[..., :-1] + a_nodes[..., 1:])


def diffusion_bands(a_nodes: np.ndarray, h: float, kind: BoundaryKind, robin_b=None):
    """Tridiagonal bands of d/dx(a du/dx) for nodal a of shape (..., N).

    Returns (lower, diag, upper) over the unknowns: the N - 2 interior nodes
    for Dirichlet, all N nodes otherwise. robin_b is (..., 2) for the two ends.
    """
    a_face = face_values(a_nodes)
    h2 = h * h
    n_nodes = a_nodes.shape[-1]
    lower = np.zeros(a_nodes.shape[:-1] + (n_nodes - 1,))
    upper = np.zeros_like(lower)
    diag = np.zeros(a_nodes.shape)

    # interior rows j = 1..N-2
    lower[..., :-1] = a_face[..., :-1] / h2
    upper[..., 1:] = a_face[..., 1:] / h2
    diag[..., 1:-1] = -(a_face[..., :-1] + a_face[..., 1:]) / h2

    if kind is BoundaryKind.DIRICHLET:
        return lower[..., 1:-1], diag[..., 1:-1], upper[..., 1:-1]

    # ghost-point rows: mirror of u and a across each end
    upper[..., 0] = 2.0 * a_face[..., 0] / h2
    diag[..., 0] = -2.0 * a_face[..., 0] / h2
    lower[..., -1] = 2.0 * a_face[..., -1] / h2
    diag[..., -1] = -2.0 * a_face[..., -1] / h2
    if kind is BoundaryKind.ROBIN:
        diag[..., 0] -= 2.0 * a_face[..., 0] * robin_b[..., 0] / (a_nodes[..., 0] * h)
        diag[..., -1] -= 2.0 * a_face[..., -1] * robin_b[..., 1] / (a_nodes[..., -1] * h)
    return lower, diag, upper


def n_unknowns(domain: Domain, kind: BoundaryKind) -> int:
    return domain.n_x if kind is BoundaryKind.DIRICHLET else domain.n_nodes


def unknown_slice(kind: BoundaryKind) -> slice:
    return slice(1, -1) if kind is BoundaryKind.DIRICHLET else slice(None)


def assemble_diffusion(model: ModelSpec, component: int, time_index: int) -> BandedOperator:
    """Discrete L_i at t_k, without the kappa_i factor."""
    if not 0 <= component < model.n:
        raise IndexError(f"component {component} out of range for n={model.n}")
    if not 0 <= time_index < model.tgrid.n_t:
        raise IndexError(f"time index {time_index} out of range for n_t={model.tgrid.n_t}")
    kind = model.boundary.kind
    a_nodes = model.diffusion.a.samples[component, 0, :, time_index]
    b = None
    if kind is BoundaryKind.ROBIN:
        b = model.boundary.robin_b[component, :, time_index]
    lower, diag, upper = diffusion_bands(a_nodes, model.domain.h, kind, b)
    return BandedOperator(size=diag.shape[-1], lower=lower, diag=diag, upper=upper,
                          bc_kind=kind, time_index=time_index)
