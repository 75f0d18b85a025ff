"""Dense/sparse linear algebra used by every other module.

Thin, contract-enforcing layer over scipy/numpy: canonical sparse storage,
reusable LU factorizations for the per-step implicit solves, and a
complete-spectrum eigenvalue routine for the iteration-matrix analyzer.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = [
    "LinalgError",
    "SingularMatrixError",
    "EigenvalueError",
    "make_sparse",
    "as_dense",
    "LuFactorization",
    "lu_factor",
    "eigenvalues",
    "spectral_radius",
]

#: Default residual scale factor for factorized solves: well-conditioned
#: systems must satisfy ||Ax - b||_inf <= RTOL * (||A||_inf ||x||_inf + ||b||_inf).
SOLVE_RTOL = 1e-10

#: Pivot magnitudes below PIVOT_RTOL * max|U_jj| are treated as singular.
PIVOT_RTOL = 1e-14


class LinalgError(Exception):
    """Base class for linear algebra failures."""


class SingularMatrixError(LinalgError):
    """Matrix is singular to working precision.

    ``pivot_index`` names the first offending pivot when it is known.
    """

    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class EigenvalueError(LinalgError):
    """The eigenvalue iteration failed to converge to a full spectrum."""


def make_sparse(rows, cols, values, shape) -> sp.csr_matrix:
    """Build a canonical CSR matrix from triplets.

    Duplicate (row, col) entries are summed during canonicalization, so the
    result stores at most one value per position.  Indices must be in range
    and values finite.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    nr, nc = shape
    if rows.size and (rows.min() < 0 or rows.max() >= nr):
        raise ValueError(f"row index out of range for shape {shape}")
    if cols.size and (cols.min() < 0 or cols.max() >= nc):
        raise ValueError(f"column index out of range for shape {shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("sparse matrix values must be finite")
    mat = sp.coo_matrix((values, (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    return mat


def as_dense(a) -> np.ndarray:
    """Validate and return a square dense matrix with finite entries."""
    if sp.issparse(a):
        a = a.toarray()
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


class LuFactorization:
    """Reusable LU factorization of a square sparse matrix.

    The factorization is computed once and solves are reentrant for
    distinct right-hand sides, which is what the constant-matrix implicit
    time steps need.
    """

    def __init__(self, matrix: sp.spmatrix, permc_spec: str = "COLAMD"):
        matrix = sp.csc_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"matrix must be square, got {matrix.shape}")
        self.shape = matrix.shape
        self._norm_inf = float(abs(matrix).sum(axis=1).max()) if matrix.nnz else 0.0
        try:
            self._lu = splu(matrix, permc_spec=permc_spec)
        except RuntimeError as exc:
            raise SingularMatrixError(
                f"sparse LU factorization failed: {exc}",
                pivot_index=_first_bad_pivot(matrix),
            ) from exc
        udiag = np.abs(self._lu.U.diagonal())
        bad = np.flatnonzero(udiag <= PIVOT_RTOL * udiag.max(initial=0.0))
        if bad.size:
            raise SingularMatrixError(
                f"matrix is singular to working precision at pivot {bad[0]}",
                pivot_index=int(bad[0]),
            )

    @property
    def norm_inf(self) -> float:
        return self._norm_inf

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        return self._lu.solve(b)

    def residual(self, matrix, x, b) -> float:
        """Scaled infinity-norm residual of a computed solve."""
        r = np.abs(matrix @ x - b).max()
        scale = self._norm_inf * np.abs(x).max() + np.abs(b).max()
        return r / scale if scale > 0 else r


def _first_bad_pivot(matrix: sp.csc_matrix) -> int | None:
    """Locate the first vanishing pivot of a matrix splu refused to factor."""
    n = matrix.shape[0]
    if n > 2000:
        return None
    import scipy.linalg as sla

    _, _, u = sla.lu(matrix.toarray())
    udiag = np.abs(np.diag(u))
    bad = np.flatnonzero(udiag <= PIVOT_RTOL * udiag.max(initial=0.0))
    return int(bad[0]) if bad.size else None


def lu_factor(matrix: sp.spmatrix) -> LuFactorization:
    """Factor a square, structurally nonsingular sparse matrix."""
    return LuFactorization(matrix)


def eigenvalues(matrix) -> np.ndarray:
    """All eigenvalues of a square dense matrix.

    Backed by LAPACK's Hessenberg reduction plus shifted-QR iteration; a
    non-converged sweep raises instead of returning a partial spectrum.
    """
    a = as_dense(matrix)
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueError(f"eigenvalue iteration did not converge: {exc}") from exc


def spectral_radius(matrix) -> float:
    """Largest eigenvalue modulus of a square dense matrix."""
    ev = eigenvalues(matrix)
    return float(np.abs(ev).max()) if ev.size else 0.0
