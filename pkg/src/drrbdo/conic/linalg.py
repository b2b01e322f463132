"""Symmetric-matrix kernels shared by the solver, the FEM layer and the samplers."""
import math

import numpy as np

from .._accel import njit, pick
from ..errors import StructuralError

SQRT2 = math.sqrt(2.0)


def check_symmetric(M, rtol=1e-12):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {M.shape}")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T), initial=0.0) > rtol * scale:
        raise StructuralError("matrix is not symmetric")
    return M


def svec_length(d):
    return d * (d + 1) // 2


def svec_side(length):
    d = int(round((math.sqrt(8 * length + 1) - 1) / 2))
    if d * (d + 1) // 2 != length or length < 1:
        raise StructuralError(f"length {length} is not a triangular number")
    return d


_INDEX_CACHE = {}


def _tri_indices(d):
    # column-major lower triangle: for each column j, rows j..d-1
    idx = _INDEX_CACHE.get(d)
    if idx is None:
        rows, cols = [], []
        for j in range(d):
            for i in range(j, d):
                rows.append(i)
                cols.append(j)
        rows = np.array(rows, dtype=np.intp)
        cols = np.array(cols, dtype=np.intp)
        scale = np.where(rows == cols, 1.0, SQRT2)
        idx = _INDEX_CACHE[d] = (rows, cols, scale)
    return idx


def svec(M):
    """Isometric vectorization of a symmetric matrix.

    Off-diagonal entries are scaled by sqrt(2) so that
    ``svec(A) @ svec(B) == trace(A @ B)``.
    """
    M = check_symmetric(M)
    rows, cols, scale = _tri_indices(M.shape[0])
    return M[rows, cols] * scale


def smat(v):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise StructuralError("smat expects a vector")
    d = svec_side(v.size)
    rows, cols, scale = _tri_indices(d)
    M = np.zeros((d, d))
    vals = v / scale
    M[rows, cols] = vals
    M[cols, rows] = vals
    return M


def svec_batch(Ms):
    """svec of a stack of symmetric matrices, shape (k, d, d) -> (k, d(d+1)/2); no symmetry check."""
    rows, cols, scale = _tri_indices(Ms.shape[-1])
    return Ms[..., rows, cols] * scale


def smat_batch(V):
    """Inverse of :func:`svec_batch` for the rows of ``V``."""
    d = svec_side(V.shape[-1])
    rows, cols, scale = _tri_indices(d)
    out = np.zeros(V.shape[:-1] + (d, d))
    vals = V / scale
    out[..., rows, cols] = vals
    out[..., cols, rows] = vals
    return out


@njit
def _cholesky_nb(M, tol):
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        acc = M[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if acc <= tol:
            return L, False
        piv = math.sqrt(acc)
        L[j, j] = piv
        for i in range(j + 1, n):
            acc = M[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / piv
    return L, True


def _cholesky_np(M, tol):
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        acc = M[j, j] - L[j, :j] @ L[j, :j]
        if acc <= tol:
            return L, False
        piv = math.sqrt(acc)
        L[j, j] = piv
        L[j + 1:, j] = (M[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / piv
    return L, True


cholesky_kernel = pick(_cholesky_nb, _cholesky_np)


def factor_spd(M, check=True, pivot_rtol=1e-12):
    """Cholesky factor of a symmetric positive definite matrix.

    Returns ``(L, ok)``.  ``ok`` is False when a pivot drops to or below
    ``pivot_rtol * max(diag(M))``; ``L`` is then only partially filled.
    """
    M = check_symmetric(M) if check else np.asarray(M, dtype=float)
    if M.shape[0] == 0:
        return M.copy(), True
    dmax = float(np.max(np.diag(M)))
    if not dmax > 0.0:
        return np.zeros_like(M), False
    return cholesky_kernel(np.ascontiguousarray(M), pivot_rtol * dmax)


def is_pd(M, pivot_rtol=1e-12):
    return factor_spd(M, check=False, pivot_rtol=pivot_rtol)[1]


def min_eigenvalue(M):
    M = check_symmetric(M)
    return float(np.linalg.eigvalsh(M)[0])
