"""Vectorization, rank, and definiteness primitives used across the package.

Conventions, fixed once here and relied on everywhere else:

* ``vec`` is column-stacking (Fortran order), so a' M b = (b kron a)' vec(M).
* ``vecs`` walks the upper triangle row by row and doubles the off-diagonal
  entries; ``vecv`` builds the matching monomial vector, so for symmetric S
  the quadratic form x' S x equals ``vecs(S) @ vecv(x)``.
"""

import numpy as np

from .errors import CootError, DimensionError


def _as_square(S, name="matrix"):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {S.shape}")
    return S


def symmetrize(S):
    """Return (S + S') / 2."""
    S = _as_square(S)
    return (S + S.T) / 2.0


def vec(M):
    """Column-stack a matrix into a 1-d array."""
    return np.asarray(M, dtype=float).reshape(-1, order="F")


def unvec(w, rows, cols):
    """Invert :func:`vec` for a ``rows x cols`` matrix."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != rows * cols:
        raise DimensionError(f"expected {rows * cols} entries, got {w.size}")
    return w.reshape((rows, cols), order="F")


def vecs(S, tol=1e-8):
    """Half-vectorize a symmetric matrix, doubling off-diagonal entries.

    The result has a(a+1)/2 entries ordered row by row along the upper
    triangle: [S11, 2 S12, ..., 2 S1a, S22, 2 S23, ...].
    """
    S = _as_square(S)
    dev = np.linalg.norm(S - S.T)
    if dev > tol * max(1.0, np.linalg.norm(S)):
        raise DimensionError(f"matrix is not symmetric (deviation {dev:.3e})")
    r, c = np.triu_indices(S.shape[0])
    w = np.where(r == c, 1.0, 2.0)
    return S[r, c] * w


def unvecs(w, a):
    """Rebuild the symmetric ``a x a`` matrix whose :func:`vecs` is ``w``."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != a * (a + 1) // 2:
        raise DimensionError(f"expected {a * (a + 1) // 2} entries, got {w.size}")
    r, c = np.triu_indices(a)
    S = np.zeros((a, a))
    S[r, c] = np.where(r == c, w, w / 2.0)
    return S + np.triu(S, 1).T


def vecv(v):
    """Monomial vector paired with :func:`vecs`: [v1^2, v1 v2, ..., va^2]."""
    v = np.asarray(v, dtype=float).reshape(-1)
    outer = np.outer(v, v)
    r, c = np.triu_indices(v.size)
    return outer[r, c]


def vecv_rows(arr):
    """Stack :func:`vecv` of every row of a (T, d) array into a (T, d(d+1)/2) array."""
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    return np.stack([vecv(row) for row in arr]) if arr.shape[0] else arr


def kron_rows(a, b):
    """Row-wise Kronecker products: row t is kron(a[t], b[t])."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] != b.shape[0]:
        raise DimensionError("row counts must match for row-wise products")
    return np.einsum("ta,tb->tab", a, b).reshape(a.shape[0], -1)


def spectral_radius(M):
    """Largest eigenvalue magnitude of a square matrix."""
    M = _as_square(M)
    try:
        return float(np.max(np.abs(np.linalg.eigvals(M))))
    except np.linalg.LinAlgError as exc:
        raise CootError(
            f"eigenvalue solve failed on matrix with norm {np.linalg.norm(M):.3e}"
        ) from exc


def min_norm_least_squares(Phi, y):
    """Minimum-norm solution of Phi w = y in the least-squares sense."""
    Phi = np.asarray(Phi, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if Phi.ndim != 2 or Phi.shape[0] != y.size:
        raise DimensionError(
            f"incompatible regression shapes {Phi.shape} and {y.shape}"
        )
    w, _, _, _ = np.linalg.lstsq(Phi, y, rcond=None)
    return w


def rank_with_tol(M, tol=1e-8):
    """Numerical rank: singular values above ``tol`` times the largest."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"rank needs a 2-d array, got shape {M.shape}")
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def null_space_basis(M, tol=1e-8):
    """Orthonormal basis of the kernel of M, as a list of 1-d arrays.

    Basis vectors are the trailing right singular vectors, in SVD order, so
    the result is deterministic for fixed input.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"kernel needs a 2-d array, got shape {M.shape}")
    _, s, Vh = np.linalg.svd(M)
    if s.size and s[0] > 0.0:
        r = int(np.sum(s > tol * s[0]))
    else:
        r = 0
    return [Vh[i].copy() for i in range(r, Vh.shape[0])]


def is_positive_definite(S, tol=0.0):
    """True when every eigenvalue of the symmetrized input exceeds ``tol``."""
    S = symmetrize(S)
    return bool(np.min(np.linalg.eigvalsh(S)) > tol)


def scale_growth_bound(value, cost, gamma, cap=10.0, tol=1e-12):
    """Admissible contraction-scale increase from a value/cost matrix pair.

    Returns gamma * (sqrt(smin(cost) / smax(value - cost) + 1) - 1) with
    singular values, capped at ``cap``.  A degenerate denominator (value
    barely above cost) means the constraint is inactive, so the cap is
    returned directly.
    """
    value = symmetrize(value)
    cost = symmetrize(cost)
    if value.shape != cost.shape:
        raise DimensionError(
            f"value/cost shape mismatch {value.shape} vs {cost.shape}"
        )
    gap = value - cost
    smax = float(np.max(np.linalg.svd(gap, compute_uv=False)))
    scale = max(1.0, float(np.max(np.linalg.svd(value, compute_uv=False))))
    if smax <= tol * scale:
        return float(cap)
    smin = float(np.min(np.linalg.svd(cost, compute_uv=False)))
    bound = gamma * (np.sqrt(smin / smax + 1.0) - 1.0)
    return float(min(bound, cap))
