"""Small dense kernels: Givens rotations, pivoted LU, real QZ with reordering,
numerical nullspaces and a companion-form eigenvalue oracle.

Everything here works on the small projected matrices of the Krylov method
or on test-scale problems. Large-scale work lives in :mod:`structsolve`.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .errors import OracleCapExceeded, QZError, SingularFactorError

EPS = np.finfo(float).eps

#: pivot breakdown factor: |pivot| <= PIVOT_FACTOR * eps * ||A||_inf is singular
PIVOT_FACTOR = 1e3

ORACLE_CAP = 600


# ---------------------------------------------------------------------------
# Givens rotations
# ---------------------------------------------------------------------------

def givens(a, b):
    """Return ``(c, s, r)`` with ``[[c, s], [-s, c]] @ [a, b] = [r, 0]``.

    ``c >= 0`` always. A zero second entry yields the identity rotation, so
    chasing a bulge that is already zero never perturbs anything.
    """
    if b == 0.0:
        return 1.0, 0.0, a
    if a == 0.0:
        return 0.0, 1.0, b
    # scale to unit size first so subnormal inputs keep full precision
    m = max(abs(a), abs(b))
    sa, sb = a / m, b / m
    rho = math.hypot(sa, sb)
    if a < 0.0:
        rho = -rho
    return sa / rho, sb / rho, rho * m


def rot_rows(A, i, j, c, s):
    """Apply ``[[c, s], [-s, c]]`` to rows ``i`` and ``j`` of ``A`` in place."""
    ri = A[i].copy()
    rj = A[j]
    A[i] = c * ri + s * rj
    A[j] = -s * ri + c * rj


def rot_cols(A, i, j, c, s):
    """Right-multiply columns ``i, j`` of ``A`` by ``[[c, s], [-s, c]]`` in place.

    New column ``i`` is ``c*A_i - s*A_j`` and new column ``j`` is
    ``s*A_i + c*A_j``.
    """
    ci = A[:, i].copy()
    cj = A[:, j]
    A[:, i] = c * ci - s * cj
    A[:, j] = s * ci + c * cj


def kill_left(mats, i, j, col, acc=None):
    """Zero ``mats[0][j, col]`` by a rotation on rows ``(i, j)``.

    The rotation is applied to every matrix in ``mats`` and accumulated into
    ``acc`` (rows), so that the product ``acc @ original`` stays consistent.
    Returns ``False`` when the target was already zero.
    """
    A = mats[0]
    if A[j, col] == 0.0:
        return False
    c, s, r = givens(A[i, col], A[j, col])
    for M in mats:
        rot_rows(M, i, j, c, s)
    A[i, col] = r
    A[j, col] = 0.0
    if acc is not None:
        rot_rows(acc, i, j, c, s)
    return True


def kill_right(mats, row, i, j, acc=None):
    """Zero ``mats[0][row, i]`` by a rotation on columns ``(i, j)``."""
    A = mats[0]
    if A[row, i] == 0.0:
        return False
    c, s, r = givens(A[row, j], A[row, i])
    for M in mats:
        rot_cols(M, i, j, c, s)
    A[row, i] = 0.0
    A[row, j] = r
    if acc is not None:
        rot_cols(acc, i, j, c, s)
    return True


# ---------------------------------------------------------------------------
# LU factorization
# ---------------------------------------------------------------------------

class LUFactor:
    """Row-pivoted LU factorization of a square (possibly sparse) matrix.

    Solves with ``A`` and with the plain transpose ``A.T`` (no conjugation)
    reuse the same factors.
    """

    def __init__(self, A, pivot_factor=PIVOT_FACTOR):
        self.shape = A.shape
        if A.shape[0] != A.shape[1]:
            raise ValueError("LU factorization needs a square matrix")
        self.sparse = sp.issparse(A)
        if self.sparse:
            A = sp.csc_matrix(A)
            norm = spla.norm(A, np.inf) if A.nnz else 0.0
            try:
                self._lu = spla.splu(A)
            except RuntimeError:
                # splu raises on an exactly singular factor
                raise SingularFactorError(0.0, pivot_factor * EPS * norm) from None
            pivots = np.abs(self._lu.U.diagonal())
        else:
            A = np.asarray(A)
            norm = np.linalg.norm(A, np.inf)
            # an exact zero pivot is reported below as SingularFactorError
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                self._lu, self._piv = sla.lu_factor(A, check_finite=False)
            pivots = np.abs(np.diag(self._lu))
        self.dtype = np.result_type(A.dtype, np.float64)
        self.min_pivot = float(pivots.min()) if pivots.size else 0.0
        self.threshold = pivot_factor * EPS * norm
        if self.min_pivot <= self.threshold:
            raise SingularFactorError(self.min_pivot, self.threshold)

    def solve(self, b, transposed=False):
        b = np.asarray(b)
        dtype = np.result_type(self.dtype, b.dtype)
        if self.sparse:
            if np.iscomplexobj(b) and not np.issubdtype(self.dtype, np.complexfloating):
                trans = "T" if transposed else "N"
                return self._lu.solve(b.real, trans=trans) + 1j * self._lu.solve(b.imag, trans=trans)
            return self._lu.solve(b.astype(dtype, copy=False), trans="T" if transposed else "N")
        return sla.lu_solve((self._lu, self._piv), b.astype(dtype, copy=False),
                            trans=1 if transposed else 0, check_finite=False)


def lu_solve(A, b, transposed=False):
    """Solve ``A x = b`` (or ``A.T x = b``) via a pivoted LU factorization."""
    return LUFactor(A).solve(b, transposed=transposed)


# ---------------------------------------------------------------------------
# Real generalized Schur form
# ---------------------------------------------------------------------------

@dataclass
class GeneralizedSchur:
    """Real generalized Schur form of the pair ``(T, H)``.

    ``Q.T @ T @ Z = S`` is upper triangular and ``Q.T @ H @ Z = R`` is quasi
    upper triangular. Eigenvalues are ``theta`` with ``H y = theta T y``.
    """

    Q: np.ndarray
    Z: np.ndarray
    S: np.ndarray
    R: np.ndarray
    block_starts: list = field(default_factory=list)
    swap_failed: bool = False

    @property
    def k(self):
        return self.S.shape[0]

    def blocks(self):
        """List of ``(start, size)`` diagonal blocks."""
        return [(i, block_size(self.R, i)) for i in self.block_starts]

    def eigenvalues(self, tol_inf=0.0):
        """Eigenvalues in diagonal order; infinite ones reported as ``inf``."""
        out = []
        for i, size in self.blocks():
            out.extend(block_eigenvalues(self.S, self.R, i, size, tol_inf))
        return np.array(out, dtype=complex)


def block_size(R, i):
    k = R.shape[0]
    return 2 if i + 1 < k and R[i + 1, i] != 0.0 else 1


def find_blocks(R):
    starts = []
    i = 0
    k = R.shape[0]
    while i < k:
        starts.append(i)
        i += block_size(R, i)
    return starts


def block_eigenvalues(S, R, i, size, tol_inf=0.0):
    """Eigenvalues ``theta`` of the diagonal block at ``i`` (``R y = theta S y``)."""
    if size == 1:
        t, h = S[i, i], R[i, i]
        if abs(t) <= tol_inf * abs(h) or t == 0.0:
            return [complex(np.inf)]
        return [complex(h / t)]
    Rb = R[i:i + 2, i:i + 2]
    Sb = S[i:i + 2, i:i + 2]
    if tol_inf and min(abs(Sb[0, 0]), abs(Sb[1, 1])) <= tol_inf * np.linalg.norm(Rb):
        return [complex(np.inf)] * 2
    ev = sla.eigvals(Rb, Sb)
    # positive imaginary part first
    return sorted(ev, key=lambda z: -z.imag)


def _clean_schur(S, R):
    S = np.triu(S)
    R = np.triu(R, -1)
    for i in range(R.shape[0] - 1):
        # LAPACK leaves exact zeros here; anything else is a real 2x2 block
        if R[i + 1, i] != 0.0 and i > 0 and R[i, i - 1] != 0.0:
            raise QZError("overlapping 2x2 blocks in generalized Schur form")
    return S, R


def qz(T, H):
    """Real QZ decomposition of the pair ``(T, H)`` (T-side triangular)."""
    T = np.asarray(T, dtype=float)
    H = np.asarray(H, dtype=float)
    k = T.shape[0]
    if k == 0:
        e = np.zeros((0, 0))
        return GeneralizedSchur(e, e.copy(), e.copy(), e.copy(), [])
    try:
        R, S, Q, Z = sla.qz(H, T, output="real")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise QZError(str(exc)) from exc
    S, R = _clean_schur(S, R)
    return GeneralizedSchur(Q, Z, S, R, find_blocks(R))


def move_block(gs, ifst, ilst):
    """Move the block starting at ``ifst`` to start at ``ilst`` (0-based)."""
    if ifst == ilst:
        return True
    R, S, Q, Z, _, info = lapack.dtgexc(gs.R, gs.S, gs.Q, gs.Z, ifst + 1, ilst + 1)
    if info != 0:
        return False
    gs.S, gs.R = _clean_schur(S, R)
    gs.Q, gs.Z = Q, Z
    gs.block_starts = find_blocks(gs.R)
    return True


def sort_schur(gs, priority, tol_inf=0.0):
    """Reorder ``gs`` in place so block priorities are non-increasing.

    ``priority(eigs)`` maps the eigenvalues of one diagonal block to a float;
    higher comes first. Selection sort over blocks using single-block moves.
    """
    pos = 0
    while pos < gs.k:
        blocks = [(i, sz) for i, sz in gs.blocks() if i >= pos]
        keys = [priority(block_eigenvalues(gs.S, gs.R, i, sz, tol_inf)) for i, sz in blocks]
        best = int(np.argmax(keys))
        start, size = blocks[best]
        if start != pos:
            if not move_block(gs, start, pos):
                gs.swap_failed = True
                size = block_size(gs.R, pos)
        else:
            size = block_size(gs.R, pos)
        pos += size
    return gs


def reorder(gs, wanted, tol_inf=0.0):
    """Move every block whose eigenvalues satisfy ``wanted`` to the front.

    The relative order inside the wanted and unwanted groups is preserved.
    A rejected swap leaves the order as it is and sets ``gs.swap_failed``.
    """
    pos = 0
    i = 0
    while i < gs.k:
        size = block_size(gs.R, i)
        if wanted(block_eigenvalues(gs.S, gs.R, i, size, tol_inf)):
            if i != pos and not move_block(gs, i, pos):
                gs.swap_failed = True
                return gs
            # skipped unwanted blocks shifted down by exactly `size`
            pos += size
        i += size
    return gs


# ---------------------------------------------------------------------------
# Nullspace and oracle
# ---------------------------------------------------------------------------

def nullspace(A, rank_tol):
    """Orthonormal basis of right singular vectors with ``sigma <= rank_tol*sigma_max``."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros((A.shape[1], 0))
    _, s, vh = np.linalg.svd(A)
    smax = s[0] if s.size else 0.0
    full = np.zeros(A.shape[1])
    full[: s.size] = s
    mask = full <= rank_tol * smax if smax > 0 else np.ones_like(full, dtype=bool)
    return vh[mask].conj().T


def companion_pencil(coeffs):
    """First companion pencil ``(A, B)`` with ``A x = lambda B x``."""
    d = len(coeffs) - 1
    n = coeffs[0].shape[0]
    dense = [c.toarray() if sp.issparse(c) else np.asarray(c, dtype=float) for c in coeffs]
    if d == 1:
        return -dense[0], dense[1]
    N = d * n
    A = np.zeros((N, N))
    B = np.eye(N)
    A[: N - n, n:] = np.eye(N - n)
    for k in range(d):
        A[N - n:, k * n:(k + 1) * n] = -dense[k]
    B[N - n:, N - n:] = dense[d]
    return A, B


def dense_polyeig_oracle(P, tol_inf=1e-8, cap=ORACLE_CAP):
    """All eigenvalues of ``P`` from its companion pencil.

    Returns ``(finite, infinite_count)``. An eigenvalue counts as infinite
    when ``|beta| <= tol_inf * |alpha|`` for its homogeneous pair.
    """
    coeffs = P.coeffs
    d = len(coeffs) - 1
    if P.n * d > cap:
        raise OracleCapExceeded(f"oracle size {P.n * d} exceeds cap {cap}")
    if d == 0:
        return np.zeros(0, dtype=complex), 0
    A, B = companion_pencil(coeffs)
    w = sla.eigvals(A, B, homogeneous_eigvals=True)
    alpha, beta = w[0], w[1]
    inf = np.abs(beta) <= tol_inf * np.abs(alpha)
    finite = alpha[~inf] / beta[~inf]
    return finite, int(inf.sum())
