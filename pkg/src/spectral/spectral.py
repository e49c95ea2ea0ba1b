# src/spectral/spectral.py

import logging
from typing import Optional

import numpy as np

from ..types.errors import SpectralError
from ..types.index import SpectralMethod, SpectralResult

logger = logging.getLogger(__name__)

TOL_RESIDUAL = 1e-8
_CHECK_EVERY = 250
_MAX_DOUBLINGS = 64


def _check_input(A: np.ndarray, eps: float = 0.0) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise SpectralError(f"expected square matrices, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise SpectralError("matrix has NaN or infinite entries")
    if np.any(A < -eps):
        raise SpectralError(f"matrix has negative entries (min {A.min():.3g})")
    return np.where(A < 0, 0.0, A)


def _max_normalize(v: np.ndarray) -> np.ndarray:
    peak = np.abs(v).max()
    return v / peak if peak > 0 else v


def _gelfand(A: np.ndarray, tol: float) -> tuple:
    """Radius from repeated squaring of B = A + I; returns (radius, vector, doublings)."""
    size = A.shape[0]
    S = A + np.eye(size)
    S /= S.max()
    ones = np.ones(size)
    previous = None
    for k in range(1, _MAX_DOUBLINGS + 1):
        S = S @ S
        peak = S.max()
        if peak <= 0:
            break
        S /= peak
        v = S @ ones
        estimate = (ones @ (A @ v)) / (ones @ v)
        if previous is not None and abs(estimate - previous) <= tol * max(1.0, estimate):
            return estimate, _max_normalize(v), k
        previous = estimate
    return previous if previous is not None else 0.0, _max_normalize(S @ ones), _MAX_DOUBLINGS


def spectral_radius(A: np.ndarray, tol: float = 1e-10, max_iters: int = 20000,
                    v0: Optional[np.ndarray] = None) -> SpectralResult:
    """Perron root of a nonnegative matrix by power iteration on A/s + I.

    s is the max row sum; the Rayleigh quotient is tracked until it stagnates
    and the residual |A v - r v| is small. Slow contraction or no convergence
    switches to the Gelfand estimate from repeated squaring.
    """
    A = _check_input(A)
    size = A.shape[0]
    scale = A.sum(axis=1).max()
    if scale == 0:
        return SpectralResult(0.0, np.ones(size), 0, SpectralMethod.POWER, 0.0)
    An = A / scale
    x = np.ones(size) if v0 is None else np.where(np.asarray(v0, dtype=float) > 0, v0, 0.0) + 1e-3
    x = _max_normalize(x)
    rho_prev = np.inf
    residual_prev = np.inf
    for it in range(1, max_iters + 1):
        y = An @ x + x
        rho = (x @ y) / (x @ x)
        x = _max_normalize(y)
        if abs(rho - rho_prev) <= tol * max(1.0, rho):
            r = rho - 1.0
            residual = np.abs(An @ x - r * x).max()
            if residual <= TOL_RESIDUAL * max(1.0, r):
                logger.debug("power iteration converged in %d iterations", it)
                return SpectralResult(max(r, 0.0) * scale, x, it, SpectralMethod.POWER, residual * scale)
        if it % _CHECK_EVERY == 0:
            residual = np.abs(An @ x - (rho - 1.0) * x).max()
            if residual > 0.5 * residual_prev:
                logger.debug("power iteration contracting slowly after %d iterations", it)
                break
            residual_prev = residual
        rho_prev = rho
    logger.warning("power iteration did not converge on a %dx%d matrix; using Gelfand estimate", size, size)
    r, v, doublings = _gelfand(An, tol)
    residual = np.abs(An @ v - r * v).max()
    return SpectralResult(max(r, 0.0) * scale, v, doublings, SpectralMethod.GELFAND, residual * scale)


def spectral_radii(A: np.ndarray, tol: float = 1e-10, max_iters: int = 20000) -> np.ndarray:
    """Vectorized Perron roots for a batch (B, n, n) of small nonnegative matrices."""
    A = _check_input(A)
    batch, n = A.shape[0], A.shape[1]
    if n == 1:
        return A[:, 0, 0].copy()
    scale = A.sum(axis=2).max(axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    An = A / scale[:, None, None]
    x = np.ones((batch, n))
    rho_prev = np.full(batch, np.inf)
    radii = np.zeros(batch)
    done = np.zeros(batch, dtype=bool)
    for _ in range(max_iters):
        active = ~done
        xa = x[active]
        y = np.einsum("bij,bj->bi", An[active], xa) + xa
        rho = np.einsum("bi,bi->b", xa, y) / np.einsum("bi,bi->b", xa, xa)
        y /= np.abs(y).max(axis=1, keepdims=True)
        x[active] = y
        idx = np.flatnonzero(active)
        converged = np.abs(rho - rho_prev[active]) <= tol * np.maximum(1.0, rho)
        radii[idx] = rho - 1.0
        rho_prev[active] = rho
        done[idx[converged]] = True
        if done.all():
            break
    for b in np.flatnonzero(~done):
        radii[b] = spectral_radius(An[b], tol=tol, max_iters=max_iters).radius
    return np.maximum(radii, 0.0) * scale


def dense_radius(A: np.ndarray) -> SpectralResult:
    """Spectral radius from the full LAPACK spectrum; test oracle only."""
    A = np.asarray(A, dtype=float)
    values, vectors = np.linalg.eig(A)
    k = int(np.argmax(np.abs(values)))
    r = float(np.abs(values[k]))
    v = np.abs(np.real(vectors[:, k]))
    v = _max_normalize(v)
    residual = float(np.abs(A @ v - r * v).max())
    return SpectralResult(r, v, 0, SpectralMethod.DENSE, residual)
