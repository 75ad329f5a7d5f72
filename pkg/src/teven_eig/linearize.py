"""Implicit T-even block linearization ``L_P(z) = z X + Y`` of a T-even polynomial.

Layout (``d`` odd, ``ell = (d + 1) / 2``, all blocks ``n x n``)::

    L_P(z) = [ M_P(z)             L_{ell-1}(-z).T (x) I ]
             [ L_{ell-1}(z) (x) I  0                    ]

with the block-diagonal core ``M_P(z) = diag(z A_k + B_k)`` and the border
rows ``y1_i - z y1_{i+1}``. For even degree a zero leading coefficient
``P_d`` is prepended, so ``A_0 = 0``.

Core block signs are ``(-1)**(ell-1-k)``: the last core block is always
``z P_1 + P_0`` and ``(Lambda(-z) (x) I) M_P(z) (Lambda(z).T (x) I) = P(z)``
holds exactly, where ``Lambda(z) = [z**(ell-1), ..., z, 1]``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import OracleCapExceeded, StructureError
from .matpoly import check_structure

MATERIALIZE_CAP = 2000


@dataclass(frozen=True, eq=False)
class EvenLinearization:
    poly: object
    n: int
    deg: int
    d: int
    ell: int
    A: tuple
    B: tuple

    @property
    def padded(self):
        """True for even degree, where the leading core block ``A_0`` is zero."""
        return self.d != self.deg

    def has_A(self, k):
        return not (k == 0 and self.padded)

    @property
    def dim(self):
        return self.d * self.n

    @property
    def core_dim(self):
        return self.ell * self.n


def build_linearization(P, tol=0.0):
    """Core block pairs of ``L_P`` for a T-even polynomial ``P``.

    ``tol`` is the absolute symmetry tolerance (exact by default).
    """
    report = check_structure(P, tol)
    if not report.is_t_even:
        raise StructureError(
            f"polynomial is not T-even (symmetry defect {report.max_symmetry_defect:.3e})")
    deg = P.deg
    if deg < 1:
        raise StructureError("linearization needs degree >= 1")
    d = deg if deg % 2 == 1 else deg + 1
    ell = (d + 1) // 2
    A, B = [], []
    for k in range(ell):
        sign = -1.0 if (ell - 1 - k) % 2 else 1.0
        A.append(sign * P.coeff(d - 2 * k))
        B.append(sign * P.coeff(d - 2 * k - 1))
    return EvenLinearization(P, P.n, deg, d, ell, tuple(A), tuple(B))


def _check_len(v, expected):
    if v.shape[0] != expected:
        raise ValueError(f"vector length {v.shape[0]} does not match {expected}")


def _mul(M, x):
    return M @ x


def apply_X(L, v):
    """``X @ v`` from the ``A_k`` blocks and the identity borders."""
    v = np.asarray(v)
    _check_len(v, L.dim)
    n, ell = L.n, L.ell
    c = L.core_dim
    out = np.zeros(v.shape, dtype=v.dtype)
    y1 = v[:c]
    y2 = v[c:]
    for k in range(ell):
        if L.has_A(k):
            out[k * n:(k + 1) * n] = _mul(L.A[k], y1[k * n:(k + 1) * n])
    if ell > 1:
        # core row k (k >= 1) picks up +y2_{k-1}; border row i gets -y1_{i+1}
        out[n:c] += y2
        out[c:] = -y1[n:]
    return out


def apply_Y(L, v):
    """``Y @ v`` from the ``B_k`` blocks and the identity borders."""
    v = np.asarray(v)
    _check_len(v, L.dim)
    n, ell = L.n, L.ell
    c = L.core_dim
    out = np.zeros(v.shape, dtype=v.dtype)
    y1 = v[:c]
    y2 = v[c:]
    for k in range(ell):
        out[k * n:(k + 1) * n] = _mul(L.B[k], y1[k * n:(k + 1) * n])
    if ell > 1:
        out[:c - n] += y2
        out[c:] = y1[:c - n]
    return out


def apply_L(L, z, v):
    """``L_P(z) @ v = z X v + Y v``."""
    return z * apply_X(L, v) + apply_Y(L, v)


def apply_MP(L, z, v):
    """Block-diagonal core ``M_P(z) @ v`` for ``v`` of length ``ell * n``."""
    v = np.asarray(v)
    _check_len(v, L.core_dim)
    n = L.n
    dtype = np.result_type(v.dtype, np.asarray(z).dtype)
    out = np.empty(v.shape, dtype=dtype)
    for k in range(L.ell):
        vk = v[k * n:(k + 1) * n]
        blk = _mul(L.B[k], vk)
        if L.has_A(k) and z != 0:
            blk = blk + z * _mul(L.A[k], vk)
        out[k * n:(k + 1) * n] = blk
    return out


def lambda_row(z, ell):
    """``[z**(ell-1), ..., z, 1]``."""
    return np.array([z ** (ell - 1 - k) for k in range(ell)])


def materialize(L, cap=MATERIALIZE_CAP):
    """Dense ``(X, Y)``; for oracles and tests only."""
    if L.dim > cap:
        raise OracleCapExceeded(f"linearization order {L.dim} exceeds cap {cap}")
    n, ell, c = L.n, L.ell, L.core_dim
    X = np.zeros((L.dim, L.dim))
    Y = np.zeros((L.dim, L.dim))
    for k in range(ell):
        s = slice(k * n, (k + 1) * n)
        if L.has_A(k):
            X[s, s] = L.A[k].toarray() if sp.issparse(L.A[k]) else L.A[k]
        Y[s, s] = L.B[k].toarray() if sp.issparse(L.B[k]) else L.B[k]
    eye = np.eye(n)
    for i in range(ell - 1):
        core_next = slice((i + 1) * n, (i + 2) * n)
        core_i = slice(i * n, (i + 1) * n)
        border = slice(c + i * n, c + (i + 1) * n)
        X[core_next, border] = eye
        X[border, core_next] = -eye
        Y[core_i, border] = eye
        Y[border, core_i] = eye
    return X, Y
