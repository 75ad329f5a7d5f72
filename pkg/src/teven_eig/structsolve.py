"""Solves with ``L_P(+-zeta)`` through one ``n x n`` factorization of ``P(zeta)``,
and the structured shift-and-invert operator
``K(zeta) = L_P(zeta)^{-T} X L_P(zeta)^{-1} X``.
"""

from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg as sla

from . import linearize as lin
from .densekernels import LUFactor, PIVOT_FACTOR, nullspace
from .errors import ShiftOnSpectrum, SingularFactorError
from .matpoly import evaluate

log = logging.getLogger(__name__)

REAL, IMAGINARY, COMPLEX = "real", "purely-imaginary", "general-complex"

SHIFT_CLASS_EPS = 1e-14
IMAG_TRUNCATION = 1e-12
# dense LU below this order even for sparse coefficients
DENSE_ORDER = 500


def classify_shift(zeta, eps=SHIFT_CLASS_EPS):
    """Return ``(shift_class, snapped_zeta)``.

    Shifts within ``eps`` (relative) of the real or imaginary axis are
    snapped onto it so the downstream arithmetic is exactly real.
    """
    zeta = complex(zeta)
    mag = abs(zeta)
    if abs(zeta.imag) <= eps * mag:
        return REAL, complex(zeta.real, 0.0)
    if abs(zeta.real) <= eps * mag:
        return IMAGINARY, complex(0.0, zeta.imag)
    return COMPLEX, zeta


@dataclass(frozen=True, eq=False)
class ShiftedFactorization:
    lin: lin.EvenLinearization
    zeta: complex
    shift_class: str
    lu: LUFactor

    @property
    def real_operator(self):
        """K(zeta) is a real matrix for real or purely imaginary shifts."""
        return self.shift_class != COMPLEX


def factorize(L, zeta, pivot_factor=PIVOT_FACTOR):
    """Factor ``P(zeta)``; raises :class:`ShiftOnSpectrum` on a tiny pivot."""
    shift_class, zeta = classify_shift(zeta)
    z = zeta.real if shift_class == REAL else zeta
    P = L.poly
    use_sparse = P.issparse and P.n > DENSE_ORDER
    Pz = evaluate(P, z, sparse=use_sparse)
    try:
        lu = LUFactor(Pz, pivot_factor=pivot_factor)
    except SingularFactorError as exc:
        raise ShiftOnSpectrum(zeta, exc.min_pivot, exc.threshold) from None
    return ShiftedFactorization(L, zeta, shift_class, lu)


def solve_L(F, x, transposed=False, check=False):
    """Solve ``L_P(sigma) y = x`` with ``sigma = -zeta`` if ``transposed`` else ``zeta``.

    Uses ``L_P(zeta).T = L_P(-zeta)`` and ``P(-zeta) = P(zeta).T``, so both
    directions share the factors of ``P(zeta)``.
    """
    L = F.lin
    x = np.asarray(x)
    lin._check_len(x, L.dim)
    n, ell, c = L.n, L.ell, L.core_dim
    sigma = -F.zeta if transposed else F.zeta
    if F.shift_class == REAL:
        sigma = sigma.real
    dtype = np.result_type(x.dtype, np.asarray(sigma).dtype)
    x1 = x[:c].astype(dtype, copy=False)
    x2 = x[c:].astype(dtype, copy=False)

    # particular solution of the border rows: yhat_k = x2_k + sigma yhat_{k+1}
    yhat = np.zeros(c, dtype=dtype)
    for k in range(ell - 2, -1, -1):
        yhat[k * n:(k + 1) * n] = x2[k * n:(k + 1) * n] + sigma * yhat[(k + 1) * n:(k + 2) * n]

    # n x n system: P(sigma) r = (Lambda(-sigma) (x) I) (x1 - M_P(sigma) yhat)
    u = x1 - lin.apply_MP(L, sigma, yhat)
    rhs = np.zeros(n, dtype=dtype)
    for k in range(ell):
        rhs = rhs * (-sigma) + u[k * n:(k + 1) * n]
    r = F.lu.solve(rhs, transposed=transposed)

    # y1 = yhat + (Lambda(sigma).T (x) I) r
    y1 = yhat
    p = np.ones((), dtype=dtype)
    for k in range(ell - 1, -1, -1):
        y1[k * n:(k + 1) * n] += p * r
        p = p * sigma

    # forward recurrence on the first ell-1 block rows of the overdetermined system
    w = x1 - lin.apply_MP(L, sigma, y1)
    y2 = np.empty((ell - 1) * n, dtype=dtype)
    prev = None
    for k in range(ell - 1):
        blk = w[k * n:(k + 1) * n]
        if prev is not None:
            blk = blk - sigma * prev
        y2[k * n:(k + 1) * n] = blk
        prev = y2[k * n:(k + 1) * n]
    if check and ell > 1:
        defect = np.linalg.norm(sigma * prev - w[(ell - 1) * n:])
        scale = max(np.linalg.norm(w), np.linalg.norm(x), 1.0)
        if defect > 1e-8 * scale:
            log.warning("inconsistent last block row in L_P solve: %.3e", defect / scale)
    return np.concatenate([y1, y2])


def apply_K(F, v):
    """``K(zeta) v`` via ``X``, ``L_P(zeta)^{-1}``, ``X``, ``L_P(-zeta)^{-1}``.

    For real or purely imaginary shifts the result is returned as a real
    vector; the discarded imaginary part is roundoff.
    """
    L = F.lin
    w = lin.apply_X(L, v)
    w = solve_L(F, w)
    w = lin.apply_X(L, w)
    w = solve_L(F, w, transposed=True)
    if F.real_operator and np.iscomplexobj(w):
        nrm = np.linalg.norm(w)
        im = np.linalg.norm(w.imag)
        if im > IMAG_TRUNCATION * nrm:
            log.warning("K(%s) v has relative imaginary part %.2e", F.zeta, im / nrm)
        w = w.real.copy()
    return w


class FactorCache:
    """Factorizations keyed by shift; counts every ``P(zeta)`` factorization."""

    def __init__(self, L, pivot_factor=PIVOT_FACTOR):
        self.lin = L
        self.pivot_factor = pivot_factor
        self._cache = {}
        self.count = 0
        self.shifts = []

    def get(self, zeta):
        _, key = classify_shift(zeta)
        F = self._cache.get(key)
        if F is None:
            F = factorize(self.lin, key, self.pivot_factor)
            self._cache[key] = F
            self.count += 1
            self.shifts.append(key)
        return F

    def __len__(self):
        return len(self._cache)


class RangeProjector:
    """Orthogonal projector that keeps Krylov vectors in the range of ``K``.

    For skew ``X`` and symmetric ``Y`` the range of ``K(zeta)`` is the
    orthogonal complement of ``Y null(X)`` for every shift, and ``null(X)``
    is the leading core block's kernel embedded in the first ``n``
    coordinates. Directions spanned by ``locked`` (already deflated kernel
    vectors) are left alone. Without the projection, round-off in that
    complement is amplified at every step of the recurrence.
    """

    def __init__(self, L, locked=None, rank_tol=1e-12):
        n = L.n
        if L.padded:
            N0 = np.eye(n)
        else:
            N0 = nullspace(L.A[0], rank_tol)
        k = N0.shape[1]
        self.kernel_dim = k
        if k == 0:
            self.W = np.zeros((L.dim, 0))
            return
        E = np.zeros((L.dim, k))
        E[:n] = N0
        W, _ = np.linalg.qr(lin.apply_Y(L, E))
        if locked is not None and locked.shape[1]:
            # keep only the part of span(W) orthogonal to the locked vectors
            C = nullspace(locked.T @ W, rank_tol)
            W = W @ C
        self.W = W

    @property
    def rank(self):
        return self.W.shape[1]

    def __call__(self, r, V=None):
        if self.W.shape[1] == 0:
            return r
        return r - self.W @ (self.W.T @ r)


class IsotropicProjector:
    """:class:`RangeProjector` followed by removal of ``span(X V)``.

    A real Krylov space of ``K`` carries one eigen-direction per Ritz value,
    and for skew ``X`` those are mutually ``X``-orthogonal, so
    ``V^T X V = 0`` in exact arithmetic. The only directions this discards
    are second copies of the values in ``span(V)`` (``+mu`` and ``-mu`` share
    one eigenvalue of ``K``), which round-off otherwise feeds in whenever the
    pole sits close to an eigenvalue.
    """

    def __init__(self, L, base):
        self.lin = L
        self.base = base

    def __call__(self, r, V=None):
        r = self.base(r)
        if V is None or V.shape[1] == 0:
            return r
        Z = lin.apply_X(self.lin, V)
        W = self.base.W
        if W.shape[1]:
            Z = Z - W @ (W.T @ Z)
        # pivoted so that the zero columns (kernel vectors of X) come last
        Z, R, _ = sla.qr(Z, mode="economic", pivoting=True)
        d = np.abs(np.diag(R))
        Z = Z[:, d > 1e-12 * max(d.max(initial=0.0), 1e-300)]
        return r - Z @ (Z.T @ r)
