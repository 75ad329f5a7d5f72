import numpy as np
import pytest

from teven_eig import linearize as lin
from teven_eig import matpoly as mp

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def rand_teven(n, deg, seed, leading=None):
    return mp.random_teven(n, deg, np.random.default_rng(seed), leading=leading)


def dense_L(L, z):
    X, Y = lin.materialize(L)
    return z * X + Y


def G_squared(L):
    """``G^2`` with ``G = X^{-1} Y``; needs a nonsingular ``X``."""
    X, Y = lin.materialize(L)
    G = np.linalg.solve(X, Y)
    return G @ G


def decomposition_residual(dec, G2):
    """``||G^2 V_m T - V_{m+1} Hbar||_F`` and the scale it is measured against."""
    m = dec.m
    res = np.linalg.norm(G2 @ dec.V[:, :m] @ dec.T - dec.V @ dec.Hbar)
    scale = np.linalg.norm(G2, 2) * np.linalg.norm(dec.T) + np.linalg.norm(dec.Hbar)
    return res, scale


def orth_drift(V):
    return np.max(np.abs(V.T @ V - np.eye(V.shape[1])))


def nearest_rel(values, oracle):
    """Largest relative distance from a value to its nearest oracle value."""
    oracle = np.asarray(oracle)
    return max(np.min(np.abs(oracle - z)) / abs(z) for z in values)


def structured_real_chase_input(p, rng):
    """``(p+1) x p`` pair right after a one-column expansion."""
    T = np.triu(rng.standard_normal((p + 1, p)))
    T[p, p - 1] = rng.standard_normal()
    T[p - 1, p - 1] = rng.standard_normal()
    H = np.triu(rng.standard_normal((p + 1, p)), -1)
    return T, H


def structured_complex_chase_input(p, rng):
    """``(p+1) x p`` pair right after a two-column expansion."""
    T = np.triu(rng.standard_normal((p + 1, p)))
    T[p - 1, p - 2] = rng.standard_normal()
    T[p, p - 1] = rng.standard_normal()
    T[p - 1, p - 1] = rng.standard_normal()
    H = np.triu(rng.standard_normal((p + 1, p)), -1)
    return T, H


def pencil_svals(H, T, thetas):
    return [np.linalg.svd(H - th * T, compute_uv=False) for th in thetas]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
