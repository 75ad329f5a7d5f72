import json

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from teven_eig import cli
from teven_eig import densekernels as dk
from teven_eig import krylovschur as ks
from teven_eig import linearize as lin
from teven_eig import matpoly as mp
from teven_eig import ratarnoldi as ra
from teven_eig import structsolve as ss

from conftest import rand_teven, structured_complex_chase_input, structured_real_chase_input

SETTINGS = settings(max_examples=60, deadline=None)

orders = st.integers(2, 5)
degrees = st.integers(1, 7)
seeds = st.integers(0, 2 ** 31 - 1)
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
shifts = st.complex_numbers(min_magnitude=0.05, max_magnitude=5.0, allow_nan=False,
                            allow_infinity=False)


@SETTINGS
@given(orders, degrees, seeds, shifts)
def test_evaluate_transpose_symmetry(n, deg, seed, z):
    P = rand_teven(n, deg, seed)
    np.testing.assert_allclose(mp.evaluate(P, -z), mp.evaluate(P, z).T,
                               atol=1e-12 * max(1.0, abs(z)) ** deg * n)


@SETTINGS
@given(orders, degrees, seeds)
def test_linearization_is_skew_and_symmetric(n, deg, seed):
    X, Y = lin.materialize(lin.build_linearization(rand_teven(n, deg, seed)))
    assert np.array_equal(X, -X.T) and np.array_equal(Y, Y.T)


@SETTINGS
@given(orders, degrees, seeds)
def test_reversal_is_involution(n, deg, seed):
    P = rand_teven(n, deg, seed)
    R = mp.reversal(mp.reversal(P))
    assert all(np.array_equal(a, b) for a, b in zip(R.coeffs, P.coeffs))


@SETTINGS
@given(orders, degrees, seeds, shifts, st.booleans())
def test_solve_residual(n, deg, seed, zeta, transposed):
    L = lin.build_linearization(rand_teven(n, deg, seed))
    X, Y = lin.materialize(L)
    try:
        F = ss.factorize(L, zeta)
    except Exception:
        return  # a random shift on the spectrum is a legitimate refusal
    sigma = -F.zeta if transposed else F.zeta
    Ls = sigma * X + Y
    cond = np.linalg.cond(Ls)
    # the border recurrences fold with powers of sigma up to ell - 1
    ell = (L.dim // n + 1) // 2
    growth = max(1.0, abs(zeta)) ** (ell - 1)
    x = np.random.default_rng(seed).standard_normal(L.dim)
    y = ss.solve_L(F, x, transposed=transposed)
    assert np.linalg.norm(Ls @ y - x) <= 1e-13 * cond * growth * np.linalg.norm(x)


@SETTINGS
@given(finite, finite)
def test_givens_properties(a, b):
    c, s, r = dk.givens(a, b)
    assert c >= 0.0
    assert abs(c * c + s * s - 1.0) <= 4e-16
    assert abs(-s * a + c * b) <= 4e-16 * max(abs(a), abs(b))
    assert abs(abs(r) - np.hypot(a, b)) <= 4e-16 * np.hypot(a, b)


@SETTINGS
@given(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_back_transform_is_principal_root(theta):
    mu, neg = ks.back_transform(theta)
    assert neg == -mu
    assert mu.real >= 0.0
    assert abs(mu * mu - theta) <= 1e-14 * max(abs(theta), 1e-300) * 4


@SETTINGS
@given(st.complex_numbers(allow_nan=False, allow_infinity=False))
def test_complex_serialization_round_trip(z):
    assert cli.decode_complex(json.loads(json.dumps(cli.encode_complex(z)))) == z


@SETTINGS
@given(st.integers(1, 9), seeds)
def test_real_chase_invariants(p, seed):
    rng = np.random.default_rng(seed)
    That, Hhat = structured_real_chase_input(p, rng)
    Q, Z, T, H = ra.bulge_chase_real(That, Hhat)
    assert not T[p].any() and not np.tril(T, -1).any() and not np.tril(H, -2).any()
    assert np.abs(Q @ Q.T - np.eye(p + 1)).max() <= 1e-13
    np.testing.assert_allclose(Q.T @ H @ Z.T, Hhat, atol=1e-13 * max(1.0, np.abs(Hhat).max()))


@SETTINGS
@given(st.integers(2, 9), seeds)
def test_complex_chase_invariants(p, seed):
    rng = np.random.default_rng(seed)
    That, Hhat = structured_complex_chase_input(p, rng)
    Q, Z, T, H = ra.bulge_chase_complex(That, Hhat)
    assert not T[p].any() and not np.tril(T, -1).any() and not np.tril(H, -2).any()
    assert np.abs(Z @ Z.T - np.eye(p)).max() <= 1e-13
    np.testing.assert_allclose(Q.T @ T @ Z.T, That, atol=1e-13 * max(1.0, np.abs(That).max()))


@SETTINGS
@given(st.integers(2, 8), seeds)
def test_qz_reorder_keeps_spectrum(k, seed):
    rng = np.random.default_rng(seed)
    T, H = rng.standard_normal((2, k, k))
    gs = dk.qz(T, H)
    ev0 = gs.eigenvalues()
    dk.sort_schur(gs, lambda ev: max(abs(z) for z in ev))
    ev1 = gs.eigenvalues()
    scale = max(1.0, np.abs(ev0).max())
    gap = max(np.min(np.abs(ev1 - z)) for z in ev0)
    assert gap <= 1e-9 * scale or gs.swap_failed
    np.testing.assert_allclose(gs.Q.T @ H @ gs.Z, gs.R, atol=1e-12 * np.linalg.norm(H))


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([(4, 1), (4, 3), (2, 3), (3, 2), (2, 4)]), seeds)
def test_solver_output_is_symmetric_and_accurate(shape, seed):
    n, deg = shape
    P = rand_teven(n, deg, seed)
    oracle, _ = dk.dense_polyeig_oracle(P)
    try:
        res = ks.run(P, M=1, initial_shift=0.37 + 0.81j, max_cycles=60)
    except Exception as exc:  # noqa: BLE001
        # a shift landing on the spectrum is a documented refusal, nothing else is
        assert type(exc).__name__ == "ShiftOnSpectrum"
        return
    ev = res.eigenvalues()
    assert len(ev) % 2 == 0 and len(ev) >= 2
    for z in ev:
        assert np.any(ev == -z)
        assert np.min(np.abs(ev - np.conj(z))) <= 1e-10 * abs(z)
        assert np.min(np.abs(oracle - z)) <= 1e-6 * abs(z)
