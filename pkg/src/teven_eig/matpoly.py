"""Real matrix polynomials: representation, structure checks, generators, I/O."""

from dataclasses import dataclass
import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import PolynomialFormatError

#: default structure tolerance for file input, relative to max coefficient norm
STRUCTURE_TOL = 1e-12

#: default butterfly constants (c01, c02, c11, c12, ..., c41, c42)
BUTTERFLY_CONSTANTS = (0.6, 1.3, 1.3, 0.1, 0.1, 1.2, 1.0, 1.0, 1.0, 1.0)


def _as_coeff(A):
    if sp.issparse(A):
        return sp.csr_matrix(A, dtype=float)
    A = np.array(A, dtype=float)
    A.setflags(write=False)
    return A


def _is_zero(A):
    if sp.issparse(A):
        return A.count_nonzero() == 0
    return not np.any(A)


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A)


class MatrixPolynomial:
    """``P(z) = sum_k z**k P_k`` with real square coefficients.

    Coefficients may be dense arrays or scipy sparse matrices; trailing zero
    coefficients are stripped so that ``P_deg`` is nonzero. Instances are
    treated as immutable.
    """

    def __init__(self, coeffs):
        coeffs = [_as_coeff(c) for c in coeffs]
        if not coeffs:
            raise ValueError("a matrix polynomial needs at least one coefficient")
        n = coeffs[0].shape[0]
        for k, c in enumerate(coeffs):
            if c.ndim != 2 or c.shape != (n, n):
                raise ValueError(f"coefficient {k} has shape {c.shape}, expected {(n, n)}")
        if n < 1:
            raise ValueError("coefficient order must be positive")
        while len(coeffs) > 1 and _is_zero(coeffs[-1]):
            coeffs.pop()
        if _is_zero(coeffs[-1]):
            raise ValueError("the zero polynomial has no leading coefficient")
        self.coeffs = tuple(coeffs)
        self.n = n
        self.deg = len(coeffs) - 1

    @property
    def issparse(self):
        return any(sp.issparse(c) for c in self.coeffs)

    def coeff(self, k):
        """Coefficient ``P_k`` (zero beyond the degree), in stored format."""
        if 0 <= k <= self.deg:
            return self.coeffs[k]
        return sp.csr_matrix((self.n, self.n)) if self.issparse else np.zeros((self.n, self.n))

    def dense_coeffs(self):
        return [_dense(c) for c in self.coeffs]

    def norm(self):
        """Largest Frobenius norm over the coefficients."""
        return max(sp.linalg.norm(c) if sp.issparse(c) else np.linalg.norm(c) for c in self.coeffs)

    def __call__(self, z):
        return evaluate(self, z)

    def __repr__(self):
        kind = "sparse" if self.issparse else "dense"
        return f"MatrixPolynomial(n={self.n}, deg={self.deg}, {kind})"


@dataclass(frozen=True)
class StructureReport:
    is_t_even: bool
    max_symmetry_defect: float


def evaluate(P, z, sparse=False):
    """Horner evaluation of ``P`` at the scalar ``z``.

    Returns a dense array unless ``sparse`` is set and the coefficients are
    sparse. The result is real when ``z`` is real.
    """
    z = complex(z)
    real = z.imag == 0.0
    z = z.real if real else z
    if P.issparse and sparse:
        acc = P.coeffs[-1].astype(float if real else complex)
        for c in reversed(P.coeffs[:-1]):
            acc = acc * z + c
        return sp.csc_matrix(acc)
    acc = np.array(_dense(P.coeffs[-1]), dtype=float if real else complex)
    for c in reversed(P.coeffs[:-1]):
        acc *= z
        acc += _dense(c)
    return acc


def check_structure(P, tol=0.0):
    """Measure how far ``P`` is from T-even.

    The defect is the largest entry of ``|P_k - sigma_k P_k.T|`` with
    ``sigma_k = +1`` for even ``k`` and ``-1`` for odd ``k``.
    """
    defect = 0.0
    for k, c in enumerate(P.coeffs):
        sign = 1.0 if k % 2 == 0 else -1.0
        diff = c - sign * c.T
        if sp.issparse(diff):
            d = abs(diff).max() if diff.nnz else 0.0
        else:
            d = float(np.max(np.abs(diff))) if diff.size else 0.0
        defect = max(defect, float(d))
    return StructureReport(defect <= tol, defect)


def is_t_even(P, tol=0.0):
    return check_structure(P, tol).is_t_even


def reversal(P):
    """``rev P(z) = z**deg P(1/z)``: the coefficient list reversed.

    Leading zero coefficients of ``P`` become trailing zeros and are
    dropped, so the degree may shrink.
    """
    return MatrixPolynomial(list(reversed(P.coeffs)))


def _nilpotent(m):
    return sp.diags([np.ones(m - 1)], [-1], shape=(m, m), format="csr")


def generate_butterfly(m, c=BUTTERFLY_CONSTANTS):
    """Degree-4 T-even butterfly polynomial of order ``m**2``.

    ``P_i = c_i1 I (x) Pt_i + c_i2 Pt_i (x) I`` with small tridiagonal
    building blocks ``Pt_i`` built from the nilpotent Jordan block.
    """
    if m < 2:
        raise ValueError("butterfly needs m >= 2")
    c = tuple(float(x) for x in c)
    if len(c) != 10:
        raise ValueError("butterfly needs 10 constants (c01, c02, ..., c41, c42)")
    if any(x <= 0 for x in c):
        raise ValueError("butterfly constants must be positive")
    N = _nilpotent(m)
    I = sp.identity(m, format="csr")
    pt0 = (4 * I + N + N.T) / 6.0
    pt1 = N - N.T
    pt2 = -(2 * I - N - N.T)
    blocks = [pt0, pt1, pt2, pt1, -pt2]
    coeffs = []
    for i, pt in enumerate(blocks):
        ci1, ci2 = c[2 * i], c[2 * i + 1]
        Pi = ci1 * sp.kron(I, pt) + ci2 * sp.kron(pt, I)
        coeffs.append(sp.csr_matrix(Pi))
    return MatrixPolynomial(coeffs)


def generate_gyroscopic(n, seed=0):
    """Random quadratic ``z**2 M + z G + K`` with M, K SPD and G skew.

    Such problems have a purely imaginary spectrum.
    """
    if n < 2:
        raise ValueError("gyroscopic generator needs n >= 2")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) / np.sqrt(n)
    B = rng.standard_normal((n, n)) / np.sqrt(n)
    C = rng.standard_normal((n, n))
    M = A.T @ A + np.eye(n)
    K = B.T @ B + np.eye(n)
    G = C - C.T
    return MatrixPolynomial([K, G, M])


def random_teven(n, deg, rng=None, leading=None):
    """Random dense T-even polynomial; handy for tests and experiments."""
    rng = np.random.default_rng(rng)
    coeffs = []
    for k in range(deg + 1):
        A = rng.standard_normal((n, n))
        coeffs.append((A + A.T) / 2 if k % 2 == 0 else (A - A.T) / 2)
    if leading is not None:
        coeffs[-1] = np.asarray(leading, dtype=float)
    return MatrixPolynomial(coeffs)


# ---------------------------------------------------------------------------
# Matrix Market + JSON manifest
# ---------------------------------------------------------------------------

def write_polynomial(P, manifest_path, stem=None):
    """Write one Matrix Market file per coefficient plus a JSON manifest.

    Coefficient paths in the manifest are relative to the manifest's
    directory. Values are written with 17 significant digits so that a
    round trip is exact.
    """
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    stem = stem or manifest_path.stem
    names = []
    for k, c in enumerate(P.coeffs):
        name = f"{stem}_P{k}.mtx"
        target = manifest_path.parent / name
        data = sp.coo_matrix(c) if sp.issparse(c) else np.asarray(c)
        scipy.io.mmwrite(str(target), data, precision=17, symmetry="general")
        names.append(name)
    manifest = {"n": P.n, "degree": P.deg, "coefficients": names}
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def read_polynomial(manifest_path):
    """Read a polynomial written by :func:`write_polynomial` (or by hand)."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise PolynomialFormatError(f"manifest not found: {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise PolynomialFormatError(f"malformed manifest {manifest_path}: {exc}") from None
    if not isinstance(manifest, dict):
        raise PolynomialFormatError("manifest must be a JSON object")
    try:
        n = int(manifest["n"])
        degree = int(manifest["degree"])
        files = list(manifest["coefficients"])
    except (KeyError, TypeError, ValueError) as exc:
        raise PolynomialFormatError(f"malformed manifest {manifest_path}: {exc!r}") from None
    if len(files) != degree + 1:
        raise PolynomialFormatError(
            f"manifest declares degree {degree} but lists {len(files)} coefficient files")
    coeffs = []
    for name in files:
        path = Path(name)
        if not path.is_absolute():
            path = manifest_path.parent / path
        if not path.exists():
            raise PolynomialFormatError(f"missing coefficient file: {path}")
        try:
            A = scipy.io.mmread(str(path))
        except Exception as exc:  # scipy raises assorted types on bad input
            raise PolynomialFormatError(f"cannot read {path}: {exc}") from None
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise PolynomialFormatError(f"coefficient {path.name} is not square: {A.shape}")
        if A.shape[0] != n:
            raise PolynomialFormatError(
                f"coefficient {path.name} has order {A.shape[0]}, manifest says {n}")
        if np.iscomplexobj(A.data if sp.issparse(A) else A):
            raise PolynomialFormatError(f"coefficient {path.name} is complex")
        coeffs.append(sp.csr_matrix(A) if sp.issparse(A) else np.asarray(A, dtype=float))
    try:
        P = MatrixPolynomial(coeffs)
    except ValueError as exc:
        raise PolynomialFormatError(str(exc)) from None
    if P.deg != degree:
        raise PolynomialFormatError(f"leading coefficient of declared degree {degree} is zero")
    return P
