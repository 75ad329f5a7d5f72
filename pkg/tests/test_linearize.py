import numpy as np
import pytest
import scipy.linalg as sla

from teven_eig import linearize as lin
from teven_eig import matpoly as mp
from teven_eig.densekernels import dense_polyeig_oracle
from teven_eig.errors import OracleCapExceeded, StructureError

from conftest import rand_teven


def reference_layout(P):
    """Dense ``(X, Y)`` assembled block by block, independent of the module."""
    deg = P.deg
    d = deg if deg % 2 else deg + 1
    ell = (d + 1) // 2
    n = P.n
    C = [np.asarray(c) for c in P.coeffs] + [np.zeros((n, n))] * (d - deg)
    X = np.zeros((d * n, d * n))
    Y = np.zeros((d * n, d * n))
    for k in range(ell):
        sign = (-1) ** (ell - 1 - k)
        s = slice(k * n, (k + 1) * n)
        X[s, s] = sign * C[d - 2 * k]
        Y[s, s] = sign * C[d - 2 * k - 1]
    # border rows y1_i - z y1_{i+1}; core columns mirror them
    Lx = np.zeros((ell - 1, ell))
    Ly = np.zeros((ell - 1, ell))
    for i in range(ell - 1):
        Ly[i, i] = 1.0
        Lx[i, i + 1] = -1.0
    c = ell * n
    X[c:, :c] = np.kron(Lx, np.eye(n))
    Y[c:, :c] = np.kron(Ly, np.eye(n))
    X[:c, c:] = -np.kron(Lx, np.eye(n)).T
    Y[:c, c:] = np.kron(Ly, np.eye(n)).T
    return X, Y


def test_degree_seven_diagonal_blocks():
    P = rand_teven(2, 7, 0)
    X, Y = lin.materialize(lin.build_linearization(P))
    n = 2
    signs = [-1, 1, -1, 1]
    for k in range(4):
        s = slice(k * n, (k + 1) * n)
        np.testing.assert_array_equal(X[s, s], signs[k] * P.coeffs[7 - 2 * k])
        np.testing.assert_array_equal(Y[s, s], signs[k] * P.coeffs[6 - 2 * k])


@pytest.mark.parametrize("deg", [1, 2, 3, 4, 5, 6, 7])
def test_layout_matches_reference(deg):
    P = rand_teven(3, deg, deg)
    X, Y = lin.materialize(lin.build_linearization(P))
    Xr, Yr = reference_layout(P)
    np.testing.assert_array_equal(X, Xr)
    np.testing.assert_array_equal(Y, Yr)


def test_degree_six_pads_zero_leading_block():
    L = lin.build_linearization(rand_teven(2, 6, 1))
    assert L.padded and L.d == 7 and L.ell == 4
    X, _ = lin.materialize(L)
    assert not X[:2, :2].any()


def test_degree_one_is_the_polynomial():
    P = rand_teven(3, 1, 2)
    L = lin.build_linearization(P)
    assert L.ell == 1 and L.dim == 3
    z = 0.7 - 0.2j
    np.testing.assert_allclose(z * lin.materialize(L)[0] + lin.materialize(L)[1], mp.evaluate(P, z))


def test_dimensions():
    L = lin.build_linearization(rand_teven(4, 5, 3))
    assert (L.d, L.ell, L.dim, L.core_dim) == (5, 3, 20, 12)
    assert L.ell * L.n + (L.ell - 1) * L.n == L.dim


def test_rejects_non_t_even():
    with pytest.raises(StructureError):
        lin.build_linearization(mp.MatrixPolynomial([np.eye(2), np.eye(2)]))


def test_rejects_constant():
    with pytest.raises(StructureError):
        lin.build_linearization(mp.MatrixPolynomial([np.eye(2)]))


def test_apply_x_degree_one():
    P = rand_teven(4, 1, 4)
    v = np.random.default_rng(0).standard_normal(4)
    np.testing.assert_allclose(lin.apply_X(lin.build_linearization(P), v), P.coeffs[1] @ v)


@pytest.mark.parametrize("deg", [3, 4, 5, 6])
def test_apply_x_y_match_materialized(deg):
    L = lin.build_linearization(rand_teven(4, deg, 5))
    X, Y = lin.materialize(L)
    v = np.random.default_rng(1).standard_normal((L.dim, 3))
    np.testing.assert_allclose(lin.apply_X(L, v), X @ v, atol=1e-14 * np.abs(X).max() * L.dim)
    np.testing.assert_allclose(lin.apply_Y(L, v), Y @ v, atol=1e-14 * np.abs(Y).max() * L.dim)


def test_apply_x_kills_first_block_for_even_degree():
    L = lin.build_linearization(rand_teven(3, 4, 6))
    v = np.zeros(L.dim)
    v[:3] = [1.0, -2.0, 0.5]
    assert not lin.apply_X(L, v).any()


def test_apply_x_length_mismatch():
    L = lin.build_linearization(rand_teven(3, 3, 7))
    with pytest.raises(ValueError):
        lin.apply_X(L, np.ones(L.dim + 1))


def test_apply_mp_at_zero():
    L = lin.build_linearization(rand_teven(3, 5, 8))
    v = np.random.default_rng(2).standard_normal(L.core_dim)
    out = lin.apply_MP(L, 0.0, v)
    for k in range(L.ell):
        s = slice(k * 3, (k + 1) * 3)
        np.testing.assert_allclose(out[s], L.B[k] @ v[s])


@pytest.mark.parametrize("deg", [1, 2, 3, 4, 5, 6, 7])
def test_core_identity(deg):
    # (Lambda(-z) (x) I) M_P(z) (Lambda(z)^T (x) I) r = P(z) r
    P = rand_teven(3, deg, 10 + deg)
    L = lin.build_linearization(P)
    rng = np.random.default_rng(deg)
    z = complex(*rng.standard_normal(2))
    r = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    lam = lin.lambda_row(z, L.ell)
    lhs = np.kron(lin.lambda_row(-z, L.ell), np.eye(3)) @ lin.apply_MP(L, z, np.kron(lam, r))
    np.testing.assert_allclose(lhs, mp.evaluate(P, z) @ r, rtol=1e-12, atol=1e-12)


def test_apply_mp_matches_dense_core():
    P = rand_teven(3, 7, 9)
    L = lin.build_linearization(P)
    z = 0.4 + 1.3j
    X, Y = lin.materialize(L)
    c = L.core_dim
    core = z * X[:c, :c] + Y[:c, :c]
    v = np.random.default_rng(3).standard_normal(c)
    np.testing.assert_allclose(lin.apply_MP(L, z, v), core @ v, rtol=1e-13, atol=1e-13)


def test_materialize_structure_exact():
    for deg in range(1, 8):
        X, Y = lin.materialize(lin.build_linearization(rand_teven(3, deg, deg)))
        assert np.array_equal(X, -X.T)
        assert np.array_equal(Y, Y.T)


def test_materialize_cap():
    L = lin.build_linearization(rand_teven(3, 3, 0))
    with pytest.raises(OracleCapExceeded):
        lin.materialize(L, cap=5)


def test_pencil_singular_at_eigenvalue():
    P = rand_teven(3, 3, 11)
    ev, _ = dense_polyeig_oracle(P)
    L = lin.build_linearization(P)
    X, Y = lin.materialize(L)
    smin = lambda z: np.linalg.svd(z * X + Y, compute_uv=False)[-1]
    assert smin(ev[0]) < 1e-10 * np.linalg.norm(X)
    assert smin(ev[0] + 0.1) > 1e-4


@pytest.mark.parametrize("deg", [1, 2, 3, 4, 5, 6, 7])
def test_pencil_spectrum_is_polynomial_spectrum(deg):
    # even order keeps the skew leading coefficient of odd degrees nonsingular
    P = rand_teven(4, deg, 20 + deg)
    X, Y = lin.materialize(lin.build_linearization(P))
    a, b = sla.eigvals(-Y, X, homogeneous_eigvals=True)
    fin = np.abs(b) > 1e-8 * np.abs(a)
    pencil = a[fin] / b[fin]
    ev, _ = dense_polyeig_oracle(P)
    assert len(pencil) == len(ev) == 4 * deg
    for z in ev:
        assert np.min(np.abs(pencil - z)) <= 1e-8 * max(abs(z), 1.0)
