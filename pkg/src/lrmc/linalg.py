"""Dense linear-algebra primitives shared by every other module.

Everything here is a thin, validated layer over LAPACK via numpy. All
functions are pure and deterministic for a fixed input, which is what the
rank decisions downstream rely on.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a 2-D float64 array with finite entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return m


class SvdResult(NamedTuple):
    """Thin SVD A = U @ diag(s) @ Vt with k = min(rows, cols)."""

    U: np.ndarray
    singular_values: np.ndarray
    Vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.Vt


def svd(a) -> SvdResult:
    """Thin SVD of a dense matrix.

    Returns
    -------
    SvdResult
        U (rows x k), singular values sorted nonincreasing, Vt (k x cols).

    Raises
    ------
    ValueError
        On invalid input.
    ArithmeticError
        If the underlying iteration fails to converge.
    """
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"SVD did not converge on a {a.shape[0]}x{a.shape[1]} matrix") from exc
    return SvdResult(u, s, vt)


def singular_values(a) -> np.ndarray:
    """Singular values only (cheaper than a full SVD for rank tests)."""
    a = as_matrix(a)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"SVD did not converge on a {a.shape[0]}x{a.shape[1]} matrix") from exc


def default_rank_tol(shape, sigma1: float) -> float:
    """Standard numerical-rank cutoff: max(rows, cols) * sigma1 * eps."""
    return max(shape) * sigma1 * np.finfo(float).eps


def numerical_rank(a, tol: float = 0.0) -> int:
    """Count singular values strictly greater than `tol`.

    A `tol` of 0 selects the default cutoff max(rows, cols) * sigma1 * eps.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    a = as_matrix(a)
    s = singular_values(a)
    if s[0] == 0.0:
        return 0
    if tol == 0.0:
        tol = default_rank_tol(a.shape, s[0])
    return int(np.count_nonzero(s > tol))


def orthonormalize(a) -> np.ndarray:
    """Orthonormal basis for the column span of `a`, via QR.

    The input must have full column rank; a rank-deficient matrix raises
    ValueError rather than silently returning a smaller basis.
    """
    a = as_matrix(a)
    rows, cols = a.shape
    if cols > rows:
        raise ValueError(f"need cols <= rows, got {rows}x{cols}")
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    if diag.min() <= max(rows, cols) * np.finfo(float).eps * max(diag.max(), 1.0):
        raise ValueError("input is rank deficient, cannot orthonormalize")
    return q


def kron_column(g, f) -> np.ndarray:
    """Kronecker column g^T (x) f for a row g of G and a column f of F.

    The ordering matches the column-major vec identity
    vec(F X G) = (G^T (x) F) vec(X): entry blocks run over g first,
    f fastest within a block.
    """
    g = np.asarray(g, dtype=float).ravel()
    f = np.asarray(f, dtype=float).ravel()
    return np.kron(g, f)
