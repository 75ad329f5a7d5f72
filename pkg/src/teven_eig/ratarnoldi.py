"""Rational Arnoldi decompositions ``G^2 V_m T_m = V_{m+1} Hbar_m`` with a
shift change allowed at every step.

``T_m`` is kept upper triangular and ``Hbar_m`` upper Hessenberg by a bulge
chase after each expansion. Nothing here needs ``G = X^{-1} Y`` to exist;
it only appears in the relation the matrices satisfy when it does.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from . import structsolve as ss
from .densekernels import kill_left, kill_right
from .errors import Breakdown

log = logging.getLogger(__name__)

#: happy breakdown when the orthogonalization residual drops below this
#: fraction of the vector norm
BREAKDOWN_TOL = 1e-12

#: accepted deviation of ``||v1||`` from one in :func:`init`
NORM_TOL = 1e-10


@dataclass
class RationalKrylovDecomposition:
    """Orthonormal ``V`` (``N x (m+1)``), triangular ``T`` and Hessenberg ``Hbar``."""

    V: np.ndarray
    T: np.ndarray
    Hbar: np.ndarray
    shifts: list = field(default_factory=list)
    locked: int = 0
    events: list = field(default_factory=list)

    @property
    def m(self):
        return self.T.shape[0]

    @property
    def H(self):
        return self.Hbar[:self.m]

    @property
    def B(self):
        return self.Hbar[self.m]

    def copy(self):
        return RationalKrylovDecomposition(self.V.copy(), self.T.copy(), self.Hbar.copy(),
                                           list(self.shifts), self.locked, list(self.events))


def init(v1):
    """Size-zero decomposition holding the single basis vector ``v1``."""
    v1 = np.asarray(v1, dtype=float)
    nrm = np.linalg.norm(v1)
    if nrm == 0.0:
        raise ValueError("starting vector is zero")
    if abs(nrm - 1.0) > NORM_TOL:
        raise ValueError(f"starting vector must be normalized (norm {nrm:.3e})")
    return RationalKrylovDecomposition(v1.reshape(-1, 1).copy(), np.zeros((0, 0)), np.zeros((1, 0)))


def orthogonalize(V, w):
    """Classical Gram-Schmidt with one reorthogonalization pass.

    Returns ``(coeffs, residual_vector, residual_norm)``.
    """
    h = V.T @ w
    w = w - V @ h
    h2 = V.T @ w
    w = w - V @ h2
    return h + h2, w, np.linalg.norm(w)


def _orth(V, w, purify=None):
    """:func:`orthogonalize`, with ``purify`` applied to the residual before
    a final pass against ``V``."""
    h, r, nrm = orthogonalize(V, w)
    if purify is None:
        return h, r, nrm
    r = purify(r, V)
    h2, r, nrm = orthogonalize(V, r)
    return h + h2, r, nrm


def _fresh_direction(V, F, rng, purify=None):
    """Unit vector orthogonal to ``V`` taken from the range of ``K``."""
    for _ in range(5):
        r = rng.standard_normal(V.shape[0])
        w = ss.apply_K(F, r)
        w = np.real(w) if np.iscomplexobj(w) else w
        _, w, nrm = _orth(V, w, purify)
        if nrm > 1e-8 * max(np.linalg.norm(r), 1.0):
            return w / nrm
    # fall back to a plain random direction
    _, w, nrm = orthogonalize(V, rng.standard_normal(V.shape[0]))
    return w / nrm


# ---------------------------------------------------------------------------
# Bulge chases
# ---------------------------------------------------------------------------

def bulge_chase_real(That, Hhat, lo=0, stats=None):
    """Restore triangular/Hessenberg form after a one-column expansion.

    ``That`` and ``Hhat`` are ``(p+1) x p``; only the last column of
    ``That`` reaches below the diagonal. Rotations never touch indices
    below ``lo`` (the locked part). Returns ``(Q, Z, T, Hbar)`` with
    ``T = Q That Z`` (last row zero) and ``Hbar = Q Hhat Z``.
    """
    T = np.array(That, dtype=float)
    H = np.array(Hhat, dtype=float)
    p = T.shape[1]
    Q = np.eye(p + 1)
    Z = np.eye(p)
    count = 0
    for k in range(p - 1, lo - 1, -1):
        # T(k+1, k) from the previous right rotation (or the new column)
        count += kill_left([T, H], k, k + 1, k, Q)
        if k - 1 >= lo:
            count += kill_right([H, T], k + 1, k - 1, k, Z)
    if stats is not None:
        stats["rotations"] = stats.get("rotations", 0) + count
    return Q, Z, T, H


def bulge_chase_complex(That, Hhat, lo=0, stats=None):
    """Two-column analogue of :func:`bulge_chase_real`.

    Inputs are ``(p+1) x p`` with the last two columns of ``That`` reaching
    one and two rows below the diagonal. Per level two left rotations clear
    the triangular factor and two right rotations clear the Hessenberg one;
    the fill one row higher is left for the next level.
    """
    T = np.array(That, dtype=float)
    H = np.array(Hhat, dtype=float)
    p = T.shape[1]
    Q = np.eye(p + 1)
    Z = np.eye(p)
    count = 0
    for k in range(p - 2, lo - 2, -1):
        if k >= lo:
            count += kill_left([T, H], k, k + 1, k, Q)
        count += kill_left([T, H], k + 1, k + 2, k + 1, Q)
        if k - 1 >= lo:
            count += kill_right([H, T], k + 2, k - 1, k, Z)
        if k >= lo:
            count += kill_right([H, T], k + 2, k, k + 1, Z)
    if stats is not None:
        stats["rotations"] = stats.get("rotations", 0) + count
    return Q, Z, T, H


# ---------------------------------------------------------------------------
# Expansion
# ---------------------------------------------------------------------------

def continuation_vector(dec, zeta):
    """Coefficients ``c`` of a continuation vector ``V c`` safe for pole ``zeta**2``.

    ``c`` spans the orthogonal complement of ``range(Hbar - zeta^2 Tbar)``, so
    ``K(zeta) V c`` cannot fall into ``span(V)`` even when ``zeta**2`` is a
    Ritz value of the current pencil. For complex poles the real part of
    that direction is used.
    """
    m = dec.m
    if m == 0:
        return np.ones(1)
    xi2 = complex(zeta) ** 2
    Tbar = np.vstack([dec.T, np.zeros((1, m))])
    A = dec.Hbar - (xi2.real * Tbar if xi2.imag == 0.0 else xi2 * Tbar)
    Q, _ = np.linalg.qr(A, mode="complete")
    c = Q[:, -1]
    if np.iscomplexobj(c):
        k = np.argmax(np.abs(c))
        c = (c * np.exp(-1j * np.angle(c[k]))).real
        c /= np.linalg.norm(c)
    return c


def _append(dec, vnew, tcols, hcols, chase, stats):
    """Extend by ``len(tcols)`` columns and one or two new basis vectors, then chase."""
    m = dec.m
    q = len(tcols)
    rows = m + 1 + q
    That = np.zeros((rows, m + q))
    Hhat = np.zeros((rows, m + q))
    That[:m, :m] = dec.T
    Hhat[:m + 1, :m] = dec.Hbar
    for j in range(q):
        That[:len(tcols[j]), m + j] = tcols[j]
        Hhat[:len(hcols[j]), m + j] = hcols[j]
    Q, Z, T, H = chase(That, Hhat, lo=dec.locked, stats=stats)
    Vhat = np.hstack([dec.V] + [v.reshape(-1, 1) for v in vnew])
    dec.V = Vhat @ Q.T
    dec.T = T[:m + q]
    dec.Hbar = H


def _start_vector(dec, cont):
    m = dec.m
    if cont is None:
        c = np.zeros(m + 1)
        c[m] = 1.0
        return dec.V[:, m], c
    c = np.asarray(cont, dtype=float)
    return dec.V @ c, c


def expand_real_shift(dec, F, breakdown="raise", rng=None, trace=None, cont=None,
                      purify=None):
    """One step with a real or purely imaginary shift (``m`` grows by one).

    The step applies ``K`` to ``V c`` (``c = e_{m+1}`` unless ``cont`` is
    given). ``purify`` maps each new direction back into the range of ``K``
    (see :class:`~.structsolve.RangeProjector`). ``breakdown="deflate"``
    turns a happy breakdown into an exact step with a zero residual
    coefficient and a fresh orthonormal direction, so the new last row of
    ``Hbar`` vanishes. Returns ``True`` when that happened.
    """
    if F.shift_class == ss.COMPLEX:
        raise ValueError("expand_real_shift needs a real or purely imaginary shift")
    m = dec.m
    xi2 = (F.zeta ** 2).real
    v, c = _start_vector(dec, cont)
    w = ss.apply_K(F, v)
    wnorm = np.linalg.norm(w)
    t, r, beta = _orth(dec.V, w, purify)
    broke = beta <= BREAKDOWN_TOL * wnorm
    if broke:
        if breakdown != "deflate":
            raise Breakdown(beta, wnorm)
        vnew = _fresh_direction(dec.V, F, np.random.default_rng(rng), purify)
        beta = 0.0
        dec.events.append({"event": "breakdown", "m": m, "shift": F.zeta})
    else:
        vnew = r / beta
    tcol = np.append(t, beta)
    hcol = xi2 * tcol
    hcol[:m + 1] += c
    stats = {}
    _append(dec, [vnew], [tcol], [hcol], bulge_chase_real, stats)
    dec.shifts.append(F.zeta)
    if trace is not None:
        trace({"event": "expand", "m": dec.m, "shift": F.zeta, "t_sub": float(beta),
               "rotations": stats.get("rotations", 0)})
    return broke


def expand_complex_shift(dec, F, breakdown="raise", rng=None, trace=None, cont=None,
                         purify=None):
    """One step with a general complex shift, in real arithmetic.

    Real and imaginary parts of ``K(xi) v_{m+1}`` are orthogonalized in turn
    and ``m`` grows by two. If one part depends on the current basis the step
    degrades to a one-column update built from the other relation.
    """
    m = dec.m
    xi2 = complex(F.zeta) ** 2
    rho, eta = xi2.real, xi2.imag
    v, c = _start_vector(dec, cont)
    w = ss.apply_K(F, v)
    wnorm = np.linalg.norm(w)
    thresh = BREAKDOWN_TOL * wnorm
    e = np.zeros(m + 3)
    e[:m + 1] = c

    t1, r1, beta1 = _orth(dec.V, w.real, purify)
    stats = {}
    if beta1 > thresh:
        v2 = r1 / beta1
        V2 = np.hstack([dec.V, v2.reshape(-1, 1)])
        t2, r2, beta2 = _orth(V2, w.imag, purify)
        if beta2 > thresh:
            v3 = r2 / beta2
            tc1 = np.concatenate([t1, [beta1, 0.0]])
            tc2 = np.append(t2, beta2)
            hc1 = e + rho * tc1 - eta * tc2
            hc2 = eta * tc1 + rho * tc2
            _append(dec, [v2, v3], [tc1, tc2], [hc1, hc2], bulge_chase_complex, stats)
            sub = (float(beta1), float(beta2))
            broke = False
        else:
            # imaginary part dependent: keep the relation of the real part only
            tc1 = np.append(t1, beta1)
            tc2 = t2
            hc1 = e[:m + 2] + rho * tc1 - eta * tc2
            _append(dec, [v2], [tc1], [hc1], bulge_chase_real, stats)
            dec.events.append({"event": "partial-breakdown", "part": "imag", "m": m})
            sub = (float(beta1),)
            broke = False
    else:
        t2, r2, beta2 = _orth(dec.V, w.imag, purify)
        if beta2 > thresh:
            # real part dependent: keep the relation of the imaginary part only
            v3 = r2 / beta2
            tc1 = np.append(t1, 0.0)
            tc2 = np.append(t2, beta2)
            hc2 = eta * tc1 + rho * tc2
            _append(dec, [v3], [tc2], [hc2], bulge_chase_real, stats)
            dec.events.append({"event": "partial-breakdown", "part": "real", "m": m})
            sub = (float(beta2),)
            broke = False
        else:
            if breakdown != "deflate":
                raise Breakdown(max(beta1, beta2), wnorm)
            vnew = _fresh_direction(dec.V, F, np.random.default_rng(rng), purify)
            tc1 = np.append(t1, 0.0)
            tc2 = np.append(t2, 0.0)
            hc1 = e[:m + 2] + rho * tc1 - eta * tc2
            _append(dec, [vnew], [tc1], [hc1], bulge_chase_real, stats)
            dec.events.append({"event": "breakdown", "m": m, "shift": F.zeta})
            sub = (0.0,)
            broke = True
    dec.shifts.append(F.zeta)
    if trace is not None:
        trace({"event": "expand", "m": dec.m, "shift": F.zeta, "t_sub": list(sub),
               "rotations": stats.get("rotations", 0)})
    return broke


def expand(dec, shift_plan, target_m, factor_cache, breakdown="raise", rng=None, trace=None,
           continuation="last", purify=None):
    """Grow ``dec`` to at least ``target_m`` columns (rational Arnoldi driver).

    ``shift_plan`` is a sequence of shifts (the last one repeats once it
    runs out) or a callable ``plan(dec, step) -> shift``. Factorizations are
    taken from ``factor_cache`` so a repeated shift costs no new LU. With
    ``breakdown="deflate"`` the loop stops after a happy breakdown; the
    return value tells whether that happened. ``continuation="safe"`` starts
    the first step from :func:`continuation_vector` instead of ``v_{m+1}``.
    """
    if continuation not in ("last", "safe"):
        raise ValueError(f"unknown continuation {continuation!r}")
    if target_m <= dec.m:
        raise ValueError(f"target size {target_m} must exceed current size {dec.m}")
    step = 0
    while dec.m < target_m:
        if callable(shift_plan):
            zeta = shift_plan(dec, step)
        else:
            zeta = shift_plan[min(step, len(shift_plan) - 1)]
        F = factor_cache.get(zeta)
        cont = continuation_vector(dec, F.zeta) if continuation == "safe" and step == 0 else None
        if F.shift_class == ss.COMPLEX:
            broke = expand_complex_shift(dec, F, breakdown, rng, trace, cont, purify)
        else:
            broke = expand_real_shift(dec, F, breakdown, rng, trace, cont, purify)
        step += 1
        if broke:
            return True
    return False
