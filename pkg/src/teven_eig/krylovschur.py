"""Restarted rational Krylov-Schur iteration for T-even polynomials.

One cycle: expand the decomposition, bring the active pencil to ordered
generalized Schur form, lock converged Ritz values, truncate, restore the
triangular/Hessenberg shape and possibly move the shift. Ritz values
``theta`` of ``H y = theta T y`` approximate ``mu**2``; each locked value is
reported as the pair ``+-sqrt(theta)``.
"""

from dataclasses import dataclass, field
import logging
import time

import numpy as np

from . import linearize as lin
from . import ratarnoldi as ra
from . import structsolve as ss
from .densekernels import (block_eigenvalues, block_size, kill_left, kill_right, nullspace, qz,
                           sort_schur)
from .errors import NoConvergence, ShiftOnSpectrum
from .linearize import build_linearization
from .matpoly import MatrixPolynomial, check_structure

log = logging.getLogger(__name__)

STRATEGIES = ("fixed", "aggressive", "lazy", "target")
SELECTORS = ("largest", "nearest")


@dataclass
class SolverConfig:
    """Parameters of :func:`run`.

    ``M`` counts Ritz values of the projected pencil; each one yields a
    ``+-mu`` pair, so ``2 M`` finite eigenvalues are reported.
    """

    M: int = 6
    extension: int | None = None
    tol_lock: float = 1e-9
    shift_change_threshold: float = 1e-5
    max_cycles: int = 200
    initial_shift: complex = 0.5 + 2j
    strategy: str = "lazy"
    target: complex | None = None
    tol_inf: float = 1e-8
    rank_tol: float = 1e-12
    selector: str = "largest"
    relative_lock: bool = False
    structure_tol: float = 1e-12
    seed: int = 0
    shift_retries: int = 3
    shift_nudge: float = 0.01
    shift_hold_tol: float = 1e-2
    pole_guard: float = 1e-2
    duplicate_tol: float | None = None
    x_purify: bool = True
    trace: object = None
    phase_hook: object = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be positive")
        if self.extension is None:
            self.extension = max(self.M, 2)
        if self.extension < 2:
            raise ValueError("extension must be at least 2")
        for name in ("tol_lock", "shift_change_threshold", "tol_inf", "rank_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.selector not in SELECTORS:
            raise ValueError(f"unknown selector {self.selector!r}")
        if self.strategy == "target" and self.target is None:
            raise ValueError("strategy 'target' needs a target value")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be positive")
        self.initial_shift = complex(self.initial_shift)
        if self.target is not None:
            self.target = complex(self.target)


@dataclass
class FinitePair:
    """A locked value: ``mu`` stands for the pair ``(mu, -mu)``."""

    mu: complex
    residual: float
    cycle: int


@dataclass
class EigenResult:
    finite_pairs: list
    infinite_count: int
    diagnostics: list
    cycles: int = 0
    factorizations: int = 0
    shifts: list = field(default_factory=list)
    converged: bool = True
    elapsed: float = 0.0

    def eigenvalues(self):
        """All reported finite eigenvalues, sorted by decreasing magnitude."""
        vals = []
        for p in self.finite_pairs:
            vals.extend([p.mu, -p.mu])
        vals.sort(key=lambda z: (-abs(z), -z.real, -z.imag))
        return np.array(vals, dtype=complex)


@dataclass
class SolverState:
    dec: ra.RationalKrylovDecomposition
    current_shift: complex
    factor_cache: ss.FactorCache
    t: int
    target_count: int
    cycle: int = 0
    locked_values: list = field(default_factory=list)
    locked_thetas: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    rng: object = None
    purify: object = None
    reach: int = 0

    @property
    def s(self):
        return self.dec.locked


def back_transform(theta):
    """``(mu, -mu)`` with ``mu`` the principal square root of ``theta``."""
    theta = complex(theta)
    if not np.isfinite(theta.real) or not np.isfinite(theta.imag):
        raise ValueError("infinite Ritz value cannot be back-transformed")
    mu = complex(np.sqrt(theta))
    return mu, -mu


def _symmetrized(P, tol):
    """Project ``P`` onto T-even structure when its defect is within ``tol``."""
    rep = check_structure(P)
    if rep.max_symmetry_defect == 0.0:
        return P
    scale = tol * P.norm()
    if rep.max_symmetry_defect > scale:
        return P  # build_linearization reports the violation
    coeffs = []
    for k, c in enumerate(P.coeffs):
        coeffs.append(0.5 * (c + c.T) if k % 2 == 0 else 0.5 * (c - c.T))
    return MatrixPolynomial(coeffs)


def _completion(V, F, rng, purify=None):
    """Unit vector orthogonal to ``V`` from the range of ``K(zeta)``."""
    return ra._fresh_direction(V, F, rng, purify)


def deflate_infinity(P, rank_tol, L=None, F=None, rng=None, purify=None):
    """Seed a decomposition with the nullspace of the leading coefficient.

    Returns ``(t, dec)``: ``t`` null vectors are embedded in the first
    ``n`` coordinates and locked with ``T_t = 0`` and ``Hbar_t = [I; 0]``.
    The extra basis column is drawn from the range of ``K(zeta)`` when a
    factorization ``F`` is given, otherwise at random.
    """
    rng = np.random.default_rng(rng)
    n = P.n
    N = (L.dim if L is not None else (P.deg if P.deg % 2 else P.deg + 1) * n)
    basis = nullspace(P.coeffs[-1], rank_tol)
    t = basis.shape[1]
    if t >= n:
        raise ValueError("leading coefficient is numerically zero; degree misdeclared")
    V = np.zeros((N, t))
    V[:n, :] = basis
    if F is not None:
        if L is not None and purify is None:
            purify = ss.RangeProjector(L, V, rank_tol)
        v = _completion(V, F, rng, purify)
    else:
        _, v, nrm = ra.orthogonalize(V, rng.standard_normal(N))
        v = v / nrm
    V = np.hstack([V, v.reshape(-1, 1)])
    T = np.zeros((t, t))
    Hbar = np.vstack([np.eye(t), np.zeros((1, t))])
    return t, ra.RationalKrylovDecomposition(V, T, Hbar, locked=t)


# ---------------------------------------------------------------------------
# Phases
# ---------------------------------------------------------------------------

def _is_infinite(eigs):
    return any(not np.isfinite(z) for z in eigs)


def _is_duplicate(eigs, locked, tol):
    if tol is None:
        return False
    return any(abs(z - w) <= tol * max(abs(w), 1.0) for z in eigs for w in locked)


#: priority of copies of locked values; behind every regular candidate,
#: ahead of infinite ones
DUPLICATE_PRIORITY = -1e300


def _priority(cfg, shift, locked=()):
    if cfg.selector == "nearest":
        ref = (cfg.target if cfg.target is not None else shift) ** 2

        def score(eigs):
            return -min(min(abs(z - ref), abs(z - ref.conjugate())) for z in eigs)
    else:
        def score(eigs):
            return max(abs(z) for z in eigs)

    def prio(eigs):
        if _is_infinite(eigs):
            return -np.inf
        # round-off brings in second copies of locked values (+-mu share one theta)
        if _is_duplicate(eigs, locked, cfg.duplicate_tol):
            return DUPLICATE_PRIORITY
        return score(eigs)
    return prio


def _factor(state, cfg):
    """Factorization for the current shift, nudging it off the spectrum if needed."""
    for attempt in range(cfg.shift_retries + 1):
        try:
            return state.factor_cache.get(state.current_shift)
        except ShiftOnSpectrum:
            if attempt == cfg.shift_retries:
                raise
            old = state.current_shift
            state.current_shift = old * (1.0 + cfg.shift_nudge) if old != 0 else cfg.shift_nudge
            log.warning("shift %s on the spectrum; retrying with %s", old, state.current_shift)


def _emit(state, cfg, record):
    state.trace.append(record)
    if cfg.trace is not None:
        cfg.trace(record)


def _expansion_target(state, target):
    """Clip ``target`` to the reachable size.

    Within one step of it the Krylov space already is the whole invariant
    subspace, so the expansion runs on into the (exact) breakdown instead of
    restarting in a space that cannot grow.
    """
    if target >= state.reach - 1:
        return state.reach
    return target


def _continuation(state):
    """``v_{m+1}`` unless the pole changed since the previous step.

    A new pole taken from a Ritz value of the kept pencil would make
    ``K v_{m+1}`` fall into ``span(V)``; only then is the safe
    continuation vector needed.
    """
    dec = state.dec
    if dec.m == 0 or not dec.shifts:
        return "last"
    _, prev = ss.classify_shift(dec.shifts[-1])
    _, cur = ss.classify_shift(state.current_shift)
    return "last" if prev == cur else "safe"


def expand_phase(state, cfg):
    """Grow the decomposition to ``t + M + extension`` with the current shift."""
    dec = state.dec
    if dec.m >= state.reach:
        return False
    target = _expansion_target(state, max(state.target_count + cfg.extension, dec.m + 1))
    _factor(state, cfg)
    return ra.expand(dec, [state.current_shift], target, state.factor_cache,
                     breakdown="deflate", rng=state.rng, trace=cfg.trace,
                     continuation=_continuation(state), purify=state.purify)


def schur_reorder(state, cfg):
    """QZ of the active pencil, wanted Ritz values first, infinite ones last."""
    dec = state.dec
    s, m = dec.locked, dec.m
    if m - s == 0:
        return None
    # equilibrate first; fresh columns can dwarf the restarted ones
    _normalize_columns(dec)
    T, Hb = dec.T, dec.Hbar
    gs = qz(T[s:, s:], Hb[s:m, s:])
    sort_schur(gs, _priority(cfg, state.current_shift, state.locked_thetas), cfg.tol_inf)
    if gs.swap_failed:
        log.warning("generalized Schur reordering rejected a swap in cycle %d", state.cycle)
    Q, Z = gs.Q, gs.Z
    dec.V[:, s:m] = dec.V[:, s:m] @ Q
    T[:s, s:] = T[:s, s:] @ Z
    T[s:, s:] = gs.S
    Hb[:s, s:] = Hb[:s, s:] @ Z
    Hb[s:m, s:] = gs.R
    Hb[m, s:] = Hb[m, s:] @ Z
    _normalize_columns(dec)
    return gs


def _normalize_columns(dec):
    """Scale the active columns of ``[T; Hbar]`` to unit norm.

    ``V T D = F V Hbar D`` for any diagonal ``D``, so this changes nothing
    but the scale on which the absolute locking test on ``b`` is applied.
    Without it a column may shrink over restarts until ``b`` looks
    converged for a meaningless ``0/0`` Ritz value.
    """
    s, m = dec.locked, dec.m
    if m == s:
        return
    nrm = np.sqrt(np.sum(dec.T[:, s:] ** 2, axis=0) + np.sum(dec.Hbar[:, s:] ** 2, axis=0))
    nrm[nrm == 0.0] = 1.0
    dec.T[:, s:] /= nrm
    dec.Hbar[:, s:] /= nrm


def lock_phase(state, cfg):
    """Lock leading converged blocks; returns how many Ritz values were locked."""
    dec = state.dec
    s, m = dec.locked, dec.m
    T, Hb = dec.T, dec.Hbar
    H = Hb[:m]
    B = Hb[m]
    tol = cfg.tol_lock * (np.linalg.norm(Hb) if cfg.relative_lock else 1.0)
    i = s
    while i < m and i < state.target_count:
        size = block_size(H, i)
        eigs = block_eigenvalues(T, H, i, size, cfg.tol_inf)
        if _is_infinite(eigs):
            break
        res = float(np.linalg.norm(B[i:i + size]))
        if res >= tol:
            break
        if _is_duplicate(eigs, state.locked_thetas, cfg.duplicate_tol):
            break
        B[i:i + size] = 0.0
        state.locked_thetas.extend(eigs)
        for theta in (eigs[:1] if size == 2 else eigs):
            mu, _ = back_transform(theta)
            state.locked_values.append(FinitePair(mu, res, state.cycle))
            if size == 2:
                state.locked_values.append(FinitePair(mu.conjugate(), res, state.cycle))
        i += size
    dec.locked = i
    return i - s


def truncate_phase(state, cfg):
    """Shrink to ``t + M`` columns, one more if a 2x2 block straddles the cut."""
    dec = state.dec
    m = dec.m
    keep = max(state.target_count, dec.locked)
    if keep < m and dec.Hbar[keep, keep - 1] != 0.0:
        keep += 1
    if keep >= m:
        return m
    V = np.hstack([dec.V[:, :keep], dec.V[:, m:m + 1]])
    T = dec.T[:keep, :keep].copy()
    Hbar = np.vstack([dec.Hbar[:keep, :keep], dec.Hbar[m:m + 1, :keep]])
    dec.V, dec.T, dec.Hbar = V, T, Hbar
    return keep


def recover_phase(state):
    """Restore ``T`` triangular, ``H`` Hessenberg and ``B = h e_k^T`` by Givens chases.

    First each coupling entry ``b_a`` is rotated into ``b_{a+1}``; the fill
    this leaves on the third subdiagonal of ``H`` is chased off the top-left
    corner. The remaining second subdiagonal is then removed bottom-up
    without touching the last column.
    """
    dec = state.dec
    s, k = dec.locked, dec.m
    if k - s <= 0:
        return 0
    T, Hb = dec.T, dec.Hbar
    Q = np.eye(k)
    count = 0

    def left(i, j, col):
        return kill_left([T, Hb], i, j, col, Q)

    def right(row, i, j):
        return kill_right([Hb, T], row, i, j)

    def chase_third(r):
        n = 0
        while r - 3 >= s and Hb[r, r - 3] != 0.0:
            n += right(r, r - 3, r - 2)
            n += left(r - 3, r - 2, r - 3)
            r -= 2
        return n

    for a in range(s, k - 1):
        count += right(k, a, a + 1)
        count += left(a, a + 1, a)
        count += chase_third(a + 1)
    for r in range(k - 1, s + 1, -1):
        if Hb[r, r - 2] != 0.0:
            count += right(r, r - 2, r - 1)
            count += left(r - 2, r - 1, r - 2)
            count += chase_third(r - 1)
    dec.V[:, :k] = dec.V[:, :k] @ Q.T
    return count


def choose_shift(state, cfg):
    """Next shift from the leading unconverged Ritz block (after locking)."""
    if cfg.strategy == "fixed":
        return cfg.initial_shift
    if cfg.strategy == "target":
        return cfg.target
    dec = state.dec
    s, m = dec.locked, dec.m
    if s >= m:
        return state.current_shift
    H = dec.Hbar[:m]
    size = block_size(H, s)
    eigs = block_eigenvalues(dec.T, H, s, size, cfg.tol_inf)
    if _is_infinite(eigs):
        return state.current_shift
    b = abs(dec.Hbar[m, s])
    if cfg.strategy == "lazy" and b < cfg.shift_change_threshold:
        return state.current_shift
    # the expansion starts from a safe continuation vector, so the pole may
    # sit on a Ritz value of the kept pencil. It is still moved off by a
    # small relative distance: a pole on an almost exact eigenvalue makes the
    # solves near singular and their error is frozen into the kept columns.
    new = complex(np.sqrt(complex(eigs[0]))) * (1.0 + cfg.pole_guard)
    # a marginal move buys nothing but a factorization
    old = state.current_shift
    if abs(new - old) <= cfg.shift_hold_tol * abs(old):
        return old
    return new


def _call_hook(state, cfg, phase):
    if cfg.phase_hook is not None:
        cfg.phase_hook(state, phase)


def _result(state, converged, started):
    pairs = list(state.locked_values)
    return EigenResult(
        finite_pairs=pairs,
        infinite_count=state.t,
        diagnostics=list(state.trace),
        cycles=state.cycle,
        factorizations=state.factor_cache.count,
        shifts=list(state.factor_cache.shifts),
        converged=converged,
        elapsed=time.perf_counter() - started,
    )


def start(P, cfg):
    """Build the linearization, deflate infinity and run the initial expansion."""
    P = _symmetrized(P, cfg.structure_tol)
    L = build_linearization(P, tol=cfg.structure_tol * P.norm())
    cache = ss.FactorCache(L)
    rng = np.random.default_rng(cfg.seed)
    state = SolverState(dec=None, current_shift=cfg.initial_shift, factor_cache=cache,
                        t=0, target_count=cfg.M, rng=rng)
    F = _factor(state, cfg)
    t, dec = deflate_infinity(P, cfg.rank_tol, L=L, F=F, rng=rng)
    state.dec = dec
    state.t = t
    base = ss.RangeProjector(L, dec.V[:, :t], cfg.rank_tol)
    state.purify = ss.IsotropicProjector(L, base) if cfg.x_purify else base
    # K has one eigenvalue per +-mu pair on its range of dimension N - dim null(X)
    available = (L.dim - base.kernel_dim) // 2
    if cfg.M > available:
        raise ValueError(f"M={cfg.M} exceeds the {available} Ritz values this problem has")
    state.reach = t + available
    state.target_count = t + cfg.M
    _call_hook(state, cfg, "init")
    if dec.m < state.target_count:
        ra.expand(dec, [state.current_shift], _expansion_target(state, state.target_count),
                  cache, breakdown="deflate", rng=rng, trace=cfg.trace, purify=state.purify)
    _call_hook(state, cfg, "initial-expand")
    return state


def run(P, cfg=None, **overrides):
    """Compute ``cfg.M`` Ritz values (``2 M`` eigenvalues ``+-mu``) of ``P``.

    Raises :class:`NoConvergence` carrying the partial result when
    ``max_cycles`` is exhausted.
    """
    if cfg is None:
        cfg = SolverConfig(**overrides)
    elif overrides:
        raise TypeError("pass either a SolverConfig or keyword overrides, not both")
    started = time.perf_counter()
    state = start(P, cfg)
    while True:
        state.cycle += 1
        shift = state.current_shift
        expand_phase(state, cfg)
        _call_hook(state, cfg, "expand")
        schur_reorder(state, cfg)
        _call_hook(state, cfg, "reorder")
        newly = lock_phase(state, cfg)
        _call_hook(state, cfg, "lock")
        dec = state.dec
        b_next = float(abs(dec.Hbar[dec.m, dec.locked])) if dec.locked < dec.m else 0.0
        record = {"event": "cycle", "cycle": state.cycle, "shift": shift, "s": dec.locked,
                  "b_next": b_next, "locked": newly, "m": dec.m,
                  "factorizations": state.factor_cache.count}
        _emit(state, cfg, record)
        if dec.locked >= state.target_count:
            return _result(state, True, started)
        if state.cycle >= cfg.max_cycles:
            raise NoConvergence(cfg.max_cycles, _result(state, False, started))
        truncate_phase(state, cfg)
        _call_hook(state, cfg, "truncate")
        new_shift = choose_shift(state, cfg)
        recover_phase(state)
        _call_hook(state, cfg, "recover")
        state.current_shift = new_shift
