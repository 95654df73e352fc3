"""Complex Hermitian linear algebra on dense numpy arrays.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. Every
function here is pure; inputs are never modified in place.
"""

from __future__ import annotations

import logging
import warnings
from typing import Any, Sequence

import numpy as np
import scipy.linalg

from opsystk.errors import AsymmetryWarning, InputError

logger = logging.getLogger(__name__)

CMatrix = np.ndarray
HermMatrix = np.ndarray

# Asymmetry above this is reported when symmetrizing on ingestion
SYMMETRIZE_WARN_TOL = 1e-9
# Asymmetry above this (relative to the norm) means "not Hermitian at all"
HERMITIAN_REJECT_TOL = 1e-6


def as_matrix(data: Any, name: str = "matrix") -> CMatrix:
    """Coerce input to a 2-D complex array."""
    arr = np.array(data, dtype=complex)
    if arr.ndim != 2:
        raise InputError(f"{name} must be a 2-D array, got shape {arr.shape}")
    return arr


def asymmetry(h: CMatrix) -> float:
    """Largest entrywise deviation from Hermiticity."""
    if h.size == 0:
        return 0.0
    return float(np.max(np.abs(h - h.conj().T)))


def hermitize(h: Any, name: str = "matrix", strict: bool = False) -> HermMatrix:
    """Symmetrize h to (h + h*)/2.

    Asymmetry above SYMMETRIZE_WARN_TOL is reported. With ``strict`` set, an
    asymmetry above HERMITIAN_REJECT_TOL relative to the norm is an error.
    """
    m = as_matrix(h, name)
    if m.shape[0] != m.shape[1]:
        raise InputError(f"{name} must be square, got shape {m.shape}")
    gap = asymmetry(m)
    if strict and gap > HERMITIAN_REJECT_TOL * max(1.0, float(np.max(np.abs(m)))):
        raise InputError(
            f"{name} is not Hermitian (asymmetry {gap:.3g})",
            suggestion="Pass a self-adjoint matrix or split it into real and imaginary parts",
        )
    if gap > SYMMETRIZE_WARN_TOL:
        warnings.warn(f"{name} symmetrized, asymmetry {gap:.3g}", AsymmetryWarning, stacklevel=2)
        logger.warning("%s symmetrized (asymmetry %.3g)", name, gap)
    return (m + m.conj().T) / 2


def kron(a: CMatrix, b: CMatrix) -> CMatrix:
    """Kronecker product a ⊗ b."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def eigh(h: HermMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvectors of a Hermitian matrix."""
    return scipy.linalg.eigh(np.asarray(h))


def min_eig(h: HermMatrix) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    m = hermitize(h, "min_eig input", strict=True)
    if m.shape[0] == 0:
        return float("inf")
    return float(scipy.linalg.eigvalsh(m, subset_by_index=[0, 0])[0])


def min_eig_pair(h: HermMatrix) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and a unit eigenvector for it."""
    m = hermitize(h, "min_eig input", strict=True)
    w, v = scipy.linalg.eigh(m, subset_by_index=[0, 0])
    return float(w[0]), v[:, 0]


def max_eig(h: HermMatrix) -> float:
    """Largest eigenvalue of a Hermitian matrix."""
    return -min_eig(-np.asarray(h))


def hs_inner(a: CMatrix, b: CMatrix) -> complex:
    """Hilbert-Schmidt pairing trace(a* b)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def realify(h: CMatrix) -> np.ndarray:
    """Real form [[Re h, -Im h], [Im h, Re h]]; Hermitian h maps to a real symmetric matrix."""
    h = np.asarray(h, dtype=complex)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def complexify(y: np.ndarray) -> HermMatrix:
    """Left inverse of realify on symmetric input; PSD input gives PSD output."""
    n = y.shape[0] // 2
    y11, y12, y21, y22 = y[:n, :n], y[:n, n:], y[n:, :n], y[n:, n:]
    return ((y11 + y22) + 1j * (y21 - y12)) / 2


def real_functional(g: CMatrix) -> np.ndarray:
    """Real symmetric R with <R, Y> = Re trace(g* complexify(Y)) for every symmetric Y."""
    r = realify(g) / 2
    return (r + r.T) / 2


def hvec(h: HermMatrix) -> np.ndarray:
    """Orthonormal real coordinates of a Hermitian matrix (Re trace(ab) = hvec(a).hvec(b))."""
    h = np.asarray(h)
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    return np.concatenate(
        [h.diagonal().real, np.sqrt(2) * h[iu].real, np.sqrt(2) * h[iu].imag]
    )


def hunvec(v: np.ndarray, n: int) -> HermMatrix:
    """Inverse of hvec."""
    iu = np.triu_indices(n, 1)
    k = len(iu[0])
    out = np.zeros((n, n), dtype=complex)
    out[np.diag_indices(n)] = v[:n]
    upper = (v[n : n + k] + 1j * v[n + k :]) / np.sqrt(2)
    out[iu] = upper
    out[(iu[1], iu[0])] = upper.conj()
    return out


def herm_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the n x n Hermitian matrices, shape (n*n, n, n)."""
    eye = np.eye(n * n)
    return np.array([hunvec(eye[i], n) for i in range(n * n)])


def op_norm(a: CMatrix) -> float:
    """Operator norm (largest singular value)."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def psd_sqrt(h: HermMatrix) -> HermMatrix:
    """Square root of a PSD matrix (negative eigenvalues clipped)."""
    w, v = eigh(hermitize(h, "psd_sqrt input"))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def psd_inv_sqrt(h: HermMatrix, floor: float = 1e-8) -> HermMatrix:
    """Inverse square root of a positive definite matrix."""
    w, v = eigh(hermitize(h, "psd_inv_sqrt input"))
    if w[0] <= floor:
        raise InputError(
            f"matrix is not positive definite (min eigenvalue {w[0]:.3g})",
            suggestion="The operation needs an invertible positive element",
        )
    return (v / np.sqrt(w)) @ v.conj().T


def elementary(i: int, j: int, n: int) -> CMatrix:
    """Matrix unit E_ij in M_n (0-indexed)."""
    e = np.zeros((n, n), dtype=complex)
    e[i, j] = 1.0
    return e


def swap(d: int) -> CMatrix:
    """Flip operator sum_ij E_ij ⊗ E_ji on C^d ⊗ C^d."""
    return sum(kron(elementary(i, j, d), elementary(j, i, d)) for i in range(d) for j in range(d))


def direct_sum(blocks: Sequence[CMatrix]) -> CMatrix:
    """Block-diagonal matrix."""
    return scipy.linalg.block_diag(*[np.asarray(b, dtype=complex) for b in blocks])


def random_hermitian(rng: np.random.Generator, n: int, scale: float = 1.0) -> HermMatrix:
    """Gaussian Hermitian matrix."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (g + g.conj().T) / 2


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> HermMatrix:
    """Random PSD matrix of the given rank with unit trace."""
    r = n if rank is None else rank
    g = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    p = g @ g.conj().T
    return p / np.trace(p).real


def to_pairs(m: CMatrix) -> list[list[list[float]]]:
    """Row-major nested [re, im] pairs."""
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def from_pairs(data: Any, name: str = "matrix") -> CMatrix:
    """Inverse of to_pairs; bare real numbers are accepted for entries."""
    try:
        rows = [[complex(x[0], x[1]) if isinstance(x, (list, tuple)) else complex(x) for x in row] for row in data]
    except (TypeError, IndexError, ValueError) as e:
        raise InputError(f"{name}: entries must be numbers or [re, im] pairs ({e})") from e
    if rows and len({len(r) for r in rows}) != 1:
        raise InputError(f"{name}: ragged rows")
    return np.array(rows, dtype=complex).reshape(len(rows), len(rows[0]) if rows else 0)
