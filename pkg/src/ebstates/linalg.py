"""Dense complex linear algebra for non-Hermitian operators.

General eigendecomposition with biorthonormally paired left/right vectors,
guarded linear solves and a defectiveness diagnostic. Matrices are plain
``numpy.ndarray`` objects; indices are 0-based here even though circuit
nodes are labelled from 1 at the public API of :mod:`ebstates.circuit`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import EigenConvergenceError, SingularMatrixError

DEFAULT_TOL = 1e-8


def as_matrix(A, *, square: bool = True, name: str = "A") -> np.ndarray:
    """Validate and return ``A`` as a 2-D finite array."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return A


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a general square matrix.

    ``right[:, m]`` and ``left[:, m]`` belong to ``eigenvalues[m]`` and are
    scaled so that ``right`` columns have unit norm and
    ``left[:, m].conj() @ right[:, m] == 1`` wherever the pairing allows it.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    residual_norms: np.ndarray
    """``|A r - lam r|`` for each unit-norm right vector."""
    left_residual_norms: np.ndarray
    """``|A^H l - conj(lam) l| / |l|`` for each left vector."""
    biortho_error: float
    """``max |L^H R - I|``; large for defective or nearly defective input."""

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def projector(self, mask) -> np.ndarray:
        """Biorthogonal spectral projector ``sum_m r_m l_m^H`` over ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        return self.right[:, mask] @ self.left[:, mask].conj().T


@dataclass(frozen=True)
class DefectivenessReport:
    eigenvalue: complex
    algebraic_multiplicity: int
    geometric_multiplicity: int

    @property
    def is_defective(self) -> bool:
        return self.geometric_multiplicity < self.algebraic_multiplicity


def _clusters(values: np.ndarray, radius: float) -> list[np.ndarray]:
    """Connected components of the union of ``radius``-balls around ``values``."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    close = np.abs(values[:, None] - values[None, :]) <= radius
    for i, j in zip(*np.nonzero(np.triu(close, 1))):
        parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def eigendecompose(A, tol: float = DEFAULT_TOL) -> EigenDecomposition:
    """Eigenvalues with paired, biorthonormalized right and left eigenvectors.

    Left vectors solve the adjoint problem ``A^H l = conj(lam) l``. Within
    every cluster of eigenvalues closer than ``tol * max(1, |A|)`` the left
    block is re-mixed so that ``L_c^H R_c = I``. With unit-norm vectors on
    both sides, clusters whose overlap matrix has a singular value below
    ``tol`` are left unmixed and show up as a large
    :attr:`EigenDecomposition.biortho_error` rather than an exception.
    """
    A = as_matrix(A)
    try:
        w, vl, vr = sla.eig(A, left=True, right=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"QR iteration failed for {A.shape[0]}x{A.shape[0]} input: {exc}") from exc

    n = A.shape[0]
    norm_a = np.linalg.norm(A, 2) if n <= 400 else np.linalg.norm(A, "fro")
    R = vr / np.linalg.norm(vr, axis=0)
    Lv = (vl / np.linalg.norm(vl, axis=0)).astype(complex)

    for idx in _clusters(w, tol * max(1.0, norm_a)):
        Rc, Lc = R[:, idx], Lv[:, idx]
        M = Lc.conj().T @ Rc
        # Unit columns: a singular value below tol means the pairing is (nearly) degenerate.
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] > tol:
            Lv[:, idx] = Lc @ np.linalg.inv(M).conj().T
        else:
            # Defective direction: scale the pairs that still overlap, leave the rest.
            d = np.einsum("ij,ij->j", Lc.conj(), Rc)
            ok = np.abs(d) > tol
            Lv[:, idx[ok]] = Lc[:, ok] / d[ok].conj()

    overlap = Lv.conj().T @ R
    biortho_error = float(np.max(np.abs(overlap - np.eye(n))))
    res_r = np.linalg.norm(A @ R - R * w, axis=0)
    lnorm = np.linalg.norm(Lv, axis=0)
    res_l = np.linalg.norm(A.conj().T @ Lv - Lv * w.conj(), axis=0) / np.where(lnorm > 0, lnorm, 1.0)
    return EigenDecomposition(w, R, Lv, res_r, res_l, biortho_error)


def eigenvalues(A) -> np.ndarray:
    """Eigenvalues only (same LAPACK path, no vectors)."""
    A = as_matrix(A)
    try:
        return sla.eigvals(A, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(str(exc)) from exc


def solve_linear(A, b, reg: float = 0.0, rcond_min: float | None = None) -> np.ndarray:
    """Solve ``(A + reg I) x = b``.

    With ``reg == 0`` a singular or numerically singular ``A`` (reciprocal
    1-norm condition estimate below ``rcond_min``, default ``n * eps``)
    raises :class:`SingularMatrixError` instead of returning garbage.
    ``b`` may be a vector or a matrix of right-hand sides.
    """
    A = as_matrix(A)
    if reg < 0:
        raise ValueError("reg must be nonnegative")
    b = np.asarray(b)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, matrix has {A.shape[0]}")
    n = A.shape[0]
    M = A + reg * np.eye(n) if reg else A
    dtype = np.result_type(M, b, np.float64)
    M = M.astype(dtype, copy=False)
    getrf, getrs, gecon = sla.get_lapack_funcs(("getrf", "getrs", "gecon"), (M,))
    lu, piv, info = getrf(M)
    if info > 0:
        raise SingularMatrixError(f"matrix is exactly singular (zero pivot at position {info})")
    anorm = np.linalg.norm(M, 1)
    rcond, _ = gecon(lu, anorm, norm="1")
    limit = n * np.finfo(float).eps if rcond_min is None else rcond_min
    if reg == 0 and (anorm == 0 or rcond < limit):
        raise SingularMatrixError(f"matrix is numerically singular (rcond={rcond:.3e} < {limit:.1e}); pass reg > 0")
    x, info = getrs(lu, piv, b.astype(dtype, copy=False))
    return x


def defectiveness(A, lam: complex, tol: float = DEFAULT_TOL) -> DefectivenessReport:
    """Algebraic vs geometric multiplicity of the eigenvalue ``lam``.

    Algebraic multiplicity counts computed eigenvalues within
    ``tol * max(1, |A|)`` of ``lam``; geometric multiplicity is the nullity
    of ``A - lam I`` with singular values below ``tol * sigma_max`` treated
    as zero.
    """
    A = as_matrix(A)
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(A, 2))
    w = eigenvalues(A)
    algebraic = int(np.sum(np.abs(w - lam) <= tol * scale))
    if algebraic == 0:
        raise ValueError(f"{lam} is not within {tol * scale:.2e} of any eigenvalue")
    s = np.linalg.svd(A - lam * np.eye(n), compute_uv=False)
    nullity = n if s[0] == 0 else int(np.sum(s <= tol * s[0]))
    geometric = max(1, min(nullity, algebraic))
    return DefectivenessReport(complex(lam), algebraic, geometric)
