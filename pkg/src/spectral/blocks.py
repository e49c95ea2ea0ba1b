# src/spectral/blocks.py

import logging
from dataclasses import replace
from typing import Sequence

import networkx as nx
import numpy as np

from ..discretize.stencil import trapezoid_average
from ..evolve.stepper import monodromy
from ..types.index import (BlockConsistencyReport, BlockDecomposition, BoundarySpec, CoefficientField,
                           DiffusionSpec, ModelSpec, Setting)
from ..utils.settings import get_settings
from .spectral import spectral_radius

logger = logging.getLogger(__name__)


def block_structure(A: np.ndarray, eps: float = 1e-12) -> BlockDecomposition:
    """Strongly connected components of the pattern A[i, j] > eps, ordered block lower triangular."""
    A = np.asarray(A, dtype=float)
    size = A.shape[0]
    graph = nx.DiGraph()
    graph.add_nodes_from(range(size))
    rows, cols = np.nonzero(A > eps)
    graph.add_edges_from((int(i), int(j)) for i, j in zip(rows, cols) if i != j)
    condensed = nx.condensation(graph)
    members = nx.get_node_attributes(condensed, "members")
    order = list(nx.lexicographical_topological_sort(condensed, key=lambda c: min(members[c])))
    # row i needs column j when A[i, j] > 0: sources of that edge must come later
    blocks = [sorted(members[c]) for c in reversed(order)]
    permutation = np.array([i for block in blocks for i in block], dtype=int)
    radii = [spectral_radius(A[np.ix_(b, b)]).radius for b in blocks]
    logger.debug("block structure: %d blocks, radii %s", len(blocks), radii)
    return BlockDecomposition(permutation=permutation, blocks=blocks, block_radii=radii)


def is_block_lower_triangular(A: np.ndarray, decomposition: BlockDecomposition, eps: float = 1e-12) -> bool:
    position = np.empty(A.shape[0], dtype=int)
    for k, block in enumerate(decomposition.blocks):
        position[block] = k
    rows, cols = np.nonzero(np.asarray(A) > eps)
    return bool(np.all(position[rows] >= position[cols]))


def restrict(model: ModelSpec, components: Sequence[int]) -> ModelSpec:
    """Sub-model on a subset of components (couplings to the rest dropped)."""
    idx = np.asarray(components, dtype=int)

    def sub(fld):
        if fld is None:
            return None
        return CoefficientField(fld.samples[np.ix_(idx, idx)], fld.period)

    diffusion = DiffusionSpec(model.diffusion.kappa[idx],
                              CoefficientField(model.diffusion.a.samples[idx], model.diffusion.a.period))
    boundary = model.boundary
    if boundary.robin_b is not None:
        boundary = BoundarySpec(boundary.kind, boundary.robin_b[idx])
    return replace(model, diffusion=diffusion, boundary=boundary,
                   M=sub(model.M), V=sub(model.V), F=sub(model.F))


def verify_block_consistency(model: ModelSpec, settings=None) -> BlockConsistencyReport:
    """Check the averaged period map against the reducible structure of the averaged reaction.

    Structural zeros of O~(T,0) must come from identically zero reaction
    entries, every diagonal block must be the period map of its own
    sub-system, and omega(O~_k) = ln r(A_kk)/T.
    """
    settings = settings or get_settings()
    eps = settings.eps_pos
    period = model.tgrid.period
    full = monodromy(model, setting=Setting.AVERAGED, settings=settings)
    O = full.matrix
    peak = np.abs(O).max()
    gen = model.generator()
    averaged = trapezoid_average(gen, model.domain)
    scale = max(1.0, float(np.abs(gen).max()))
    violations = []

    zero_entries = []
    n = model.n
    for i in range(n):
        for j in range(n):
            if i != j and O[i, j] <= eps * peak:
                zero_entries.append((i, j))
                if np.abs(averaged[i, j]).max() > eps * scale:
                    violations.append(f"O~[{i},{j}] = 0 but averaged m[{i},{j}] is not identically 0")
                if np.abs(gen[i, j]).max() > eps * scale:
                    violations.append(f"O~[{i},{j}] = 0 but m[{i},{j}](x,t) is not identically 0")

    decomposition = block_structure(O, eps * peak)
    omega_full = (np.log(spectral_radius(O).radius) + full.log_scale) / period
    block_omegas = []
    for block, radius in zip(decomposition.blocks, decomposition.block_radii):
        sub = monodromy(restrict(model, block), setting=Setting.AVERAGED,
                        min_refine=full.refinements, settings=settings)
        expected = O[np.ix_(block, block)]
        actual = sub.matrix * np.exp(sub.log_scale - full.log_scale)
        if np.abs(actual - expected).max() > 1e-8 * max(peak, 1e-300):
            violations.append(f"block {block}: sub-system period map differs from the diagonal block")
        omega_k = (np.log(spectral_radius(sub.matrix).radius) + sub.log_scale) / period
        block_omegas.append(float(omega_k))
        with np.errstate(divide="ignore"):
            omega_block = (np.log(radius) + full.log_scale) / period
        if not np.isclose(omega_k, omega_block, rtol=1e-8, atol=1e-8):
            violations.append(f"block {block}: omega {omega_k:.12g} != ln r(A_kk)/T {omega_block:.12g}")
    if block_omegas and not np.isclose(max(block_omegas), omega_full, rtol=1e-8, atol=1e-8):
        violations.append(f"max block omega {max(block_omegas):.12g} != omega {omega_full:.12g}")
    for message in violations:
        logger.warning("block consistency: %s", message)
    return BlockConsistencyReport(blocks=decomposition.blocks, block_omegas=block_omegas,
                                  zero_entries=zero_entries, violations=violations)
