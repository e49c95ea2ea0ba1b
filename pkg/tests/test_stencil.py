# tests/test_stencil.py
import numpy as np
import pytest

from tests.conftest import scalar_config
from src.discretize.stencil import assemble_diffusion, diffusion_bands, n_unknowns, trapezoid_average
from src.model.model import build_model
from src.types.index import BoundaryKind, Domain


def _model(kind="neumann", a=None, b=None, n_x=31):
    return build_model(scalar_config(kind=kind, a=a, b=b, n_x=n_x, n_t=16))


def test_unknown_counts():
    domain = Domain(0.0, 1.0, 10)
    assert n_unknowns(domain, BoundaryKind.DIRICHLET) == 10
    assert n_unknowns(domain, BoundaryKind.NEUMANN) == 12
    assert n_unknowns(domain, BoundaryKind.ROBIN) == 12


def test_neumann_rows_sum_to_zero():
    op = assemble_diffusion(_model(a=["1 + x + 0.5*sin(2*pi*t/T)"]), 0, 3)
    L = op.to_dense()
    assert np.allclose(L.sum(axis=1), 0.0, atol=1e-9)
    off = L - np.diag(np.diag(L))
    assert np.all(off >= 0)


def test_trapezoid_weights_are_left_null_vector():
    """The spatial average is conserved by the Neumann operator"""
    model = _model(a=["2 + cos(3*x)"])
    L = assemble_diffusion(model, 0, 0).to_dense()
    weights = np.full(model.domain.n_nodes, model.domain.h)
    weights[[0, -1]] *= 0.5
    assert np.abs(weights @ L).max() < 1e-9 * np.abs(L).max()


def test_second_order_on_smooth_function():
    errors = []
    for n_x in (31, 63):
        model = _model(n_x=n_x)
        x = model.domain.nodes
        L = assemble_diffusion(model, 0, 0)
        u = np.cos(np.pi * x)
        errors.append(np.abs(L.matvec(u) + np.pi ** 2 * u).max())
    order = np.log2(errors[0] / errors[1])
    assert order > 1.7


def test_dirichlet_operator_eigenvalues():
    model = _model(kind="dirichlet", n_x=20)
    L = assemble_diffusion(model, 0, 0).to_dense()
    assert L.shape == (20, 20)
    h = model.domain.h
    expected = -4.0 / h ** 2 * np.sin(np.pi * np.arange(1, 21) * h / 2) ** 2
    assert np.allclose(np.sort(np.linalg.eigvalsh(L)), np.sort(expected))


def test_robin_adds_boundary_loss():
    neumann = assemble_diffusion(_model(), 0, 0).to_dense()
    robin = assemble_diffusion(_model(kind="robin", b=["2"]), 0, 0).to_dense()
    h = _model().domain.h
    diff = robin - neumann
    assert diff[0, 0] == pytest.approx(-2 * 2 / h)
    assert diff[-1, -1] == pytest.approx(-2 * 2 / h)
    diff[0, 0] = diff[-1, -1] = 0.0
    assert np.allclose(diff, 0.0)


def test_batched_bands_match_single():
    a = np.array([[1.0, 1.5, 2.0, 1.0, 0.5], [2.0, 2.0, 2.0, 2.0, 2.0]])
    lower, diag, upper = diffusion_bands(a, 0.25, BoundaryKind.NEUMANN)
    single = diffusion_bands(a[1], 0.25, BoundaryKind.NEUMANN)
    assert np.allclose(lower[1], single[0])
    assert np.allclose(diag[1], single[1])
    assert np.allclose(upper[1], single[2])


def test_trapezoid_average_is_exact_for_linear():
    domain = Domain(0.0, 2.0, 5)
    samples = 3.0 + domain.nodes
    assert trapezoid_average(samples, domain, axis=-1) == pytest.approx(4.0)
