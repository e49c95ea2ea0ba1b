# tests/conftest.py
import os
import sys
from pathlib import Path

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from src.utils.settings import Settings

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def split_config(V, F, kappa=1.0, kind="neumann", n_x=16, n_t=200, period=1.0, a=None, b=None) -> dict:
    """In-memory config of a split model -V + F."""
    n = len(V)
    kappa = kappa if isinstance(kappa, list) else [kappa] * n
    raw = {
        "domain": {"x_lo": 0.0, "x_hi": 1.0, "n_x": n_x},
        "time": {"period": period, "n_t": n_t},
        "diffusion": {"kappa": kappa},
        "boundary": {"kind": kind},
        "reaction": {"form": "split", "V": V, "F": F},
    }
    if a is not None:
        raw["diffusion"]["a"] = a
    if b is not None:
        raw["boundary"]["b"] = b
    return raw


def combined_config(entries, kappa=1.0, kind="neumann", n_x=16, n_t=200, period=1.0, a=None, b=None) -> dict:
    raw = split_config([["0"] * len(entries)] * len(entries), entries, kappa, kind, n_x, n_t, period, a, b)
    raw["reaction"] = {"form": "combined", "entries": entries}
    return raw


def scalar_config(beta="1 + x", gamma="1", **kwargs) -> dict:
    return split_config([[gamma]], [[beta]], **kwargs)


def nonlinear_config(G, v_lower, v_upper, kappa=1.0, n_x=16, n_t=100, h=None) -> dict:
    raw = {
        "domain": {"n_x": n_x},
        "time": {"period": 1.0, "n_t": n_t},
        "diffusion": {"kappa": [kappa] * len(G)},
        "boundary": {"kind": "neumann"},
        "nonlinear": {"G": G, "v_lower": v_lower, "v_upper": v_upper},
    }
    if h is not None:
        raw["nonlinear"]["h"] = h
    return raw


def zika_config(n_x=16, n_t=200, **fields) -> dict:
    zika = {"H_u": 1.0, "beta": 2.0, "gamma": 1.0, "mu1": 1.0, "mu2": 1.0, "sigma1": 1.0, "sigma2": 1.0}
    zika.update(fields)
    return {"domain": {"n_x": n_x}, "time": {"period": 1.0, "n_t": n_t}, "zika": zika}


def periodic_logistic(times, amplitude=0.5, period=1.0, n_quad=20001) -> np.ndarray:
    """Periodic solution of V' = (1 + amplitude*sin(2*pi*t/T)) V - V**2 through u = 1/V.

    u' = -r u + 1, so u(t) = exp(-R(t)) (u0 + int_0^t exp(R)) with R = int_0^t r
    and u0 = int_0^T exp(R) / (exp(R(T)) - 1).
    """
    def R(t):
        return t + amplitude * period / (2 * np.pi) * (1 - np.cos(2 * np.pi * t / period))

    s = np.linspace(0.0, period, n_quad)
    E = cumulative_trapezoid(np.exp(R(s)), s, initial=0.0)
    u0 = E[-1] / (np.exp(R(period)) - 1)
    return 1.0 / (np.exp(-R(times)) * (u0 + np.interp(times, s, E)))


@pytest.fixture
def settings():
    return Settings()


@pytest.fixture
def tight_settings():
    return Settings(power_tol=1e-12, tol_fp=1e-10)
