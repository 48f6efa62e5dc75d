"""Manifold geometry at a rank-r point: complements, tangent space,
well-posedness certificates and the characteristic rank.

The central object is the certificate of Kronecker-column independence:
a completion Y of rank r is locally unique for a pattern exactly when the
columns g_j^T (x) f_i over the unobserved positions (i, j) are linearly
independent, where F and G annihilate Y from the left and right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, singular_values, svd
from .patterns import (
    ObservationPattern,
    ObservedMatrix,
    generic_bound,
    is_reducible,
    min_count_check,
)

DEFAULT_RANK_RTOL = 1e-9


def _check_rank(y: np.ndarray, r: int, rtol: float) -> None:
    s = singular_values(y)
    observed = int((s > rtol * s[0]).sum()) if s[0] > 0 else 0
    if observed != r:
        raise ValueError(f"matrix has numerical rank {observed}, expected r={r} (rtol={rtol:g})")


@dataclass(frozen=True)
class Complements:
    """Annihilators F (left, (n1-r) x n1, F Y = 0) and G (right, n2 x (n2-r), Y G = 0)."""

    F: np.ndarray
    G: np.ndarray


def complements(y, r: int, rtol: float = DEFAULT_RANK_RTOL) -> Complements:
    """Orthonormal left/right complements of a rank-r matrix, from its SVD."""
    y = as_matrix(y)
    n1, n2 = y.shape
    if not 0 < r <= min(n1, n2):
        raise ValueError(f"r must be in [1, {min(n1, n2)}]")
    _check_rank(y, r, rtol)
    u, _, vt = np.linalg.svd(y)
    return Complements(F=u[:, r:].T.copy(), G=vt[r:, :].T.copy())


@dataclass(frozen=True)
class TangentBasis:
    """Orthonormal Frobenius basis of the tangent space at a rank-r point.

    The stack has shape (dim, n1, n2) with dim = r(n1 + n2 - r). Elements
    are outer products u_a v_b^T taken from the SVD of Y, with a < r or
    b < r, which spans exactly {Q1 Y + Y Q2}.
    """

    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def matrices_on(self, pattern: ObservationPattern) -> np.ndarray:
        """Design matrix (m x dim): basis elements restricted to observed entries."""
        ii, jj = pattern.indices[:, 0], pattern.indices[:, 1]
        return self.basis[:, ii, jj].T


def tangent_basis(y, r: int, rtol: float = DEFAULT_RANK_RTOL) -> TangentBasis:
    y = as_matrix(y)
    n1, n2 = y.shape
    if not 0 < r <= min(n1, n2):
        raise ValueError(f"r must be in [1, {min(n1, n2)}]")
    _check_rank(y, r, rtol)
    u, _, vt = np.linalg.svd(y)
    mats = []
    for a in range(r):
        for b in range(n2):
            mats.append(np.outer(u[:, a], vt[b, :]))
    for a in range(r, n1):
        for b in range(r):
            mats.append(np.outer(u[:, a], vt[b, :]))
    return TangentBasis(basis=np.stack(mats))


def normal_space_basis(y, r: int, rtol: float = DEFAULT_RANK_RTOL) -> np.ndarray:
    """Stack of f g^T over rows f of F and columns g of G; spans the normal space."""
    comp = complements(y, r, rtol)
    mats = []
    for a in range(comp.F.shape[0]):
        for b in range(comp.G.shape[1]):
            mats.append(np.outer(comp.F[a, :], comp.G[:, b]))
    return np.stack(mats)


@dataclass(frozen=True)
class WellPosednessReport:
    """Outcome of the Kronecker-column independence certificate.

    `rank_of_K` is None when the dimension test already fails and the
    expensive rank computation was skipped; well_posed is False then.
    The necessary-condition diagnostics (row/column counts, reducibility)
    are informational: they do not enter the certificate itself.
    """

    r: int
    rank_of_K: int | None
    required_rank: int
    well_posed: bool
    dimension_ok: bool
    min_counts_ok: bool
    irreducible: bool
    generic_rank_bound: float
    tol_used: float


def wellposedness_check(
    y, r: int, p: ObservationPattern, rtol: float = DEFAULT_RANK_RTOL
) -> WellPosednessReport:
    """Certify local uniqueness of the completion Y at rank r for pattern p.

    Builds the (n1-r)(n2-r) x |complement| matrix K of Kronecker columns
    and tests whether its rank equals the number of unobserved entries.
    """
    y = as_matrix(y)
    if y.shape != p.shape:
        raise ValueError(f"matrix shape {y.shape} does not match pattern {p.shape}")
    n1, n2 = y.shape
    comp_idx = p.complement_indices()
    required = comp_idx.shape[0]
    bounds = generic_bound(p)
    min_counts_ok = min_count_check(p, r) if r <= min(n1, n2) else False
    irreducible = not is_reducible(p).reducible

    if required == 0:
        report = WellPosednessReport(
            r=r, rank_of_K=0, required_rank=0, well_posed=True, dimension_ok=True,
            min_counts_ok=min_counts_ok, irreducible=irreducible,
            generic_rank_bound=bounds.R_value, tol_used=rtol,
        )
        return report

    dimension_ok = (n1 - r) * (n2 - r) >= required
    if not dimension_ok:
        return WellPosednessReport(
            r=r, rank_of_K=None, required_rank=required, well_posed=False,
            dimension_ok=False, min_counts_ok=min_counts_ok, irreducible=irreducible,
            generic_rank_bound=bounds.R_value, tol_used=rtol,
        )

    comp = complements(y, r, rtol)
    # column c is kron_column(G[j], F[:, i]) for the c-th unobserved (i, j);
    # one broadcast instead of a per-column loop, which dominates at scale
    outer = comp.G[comp_idx[:, 1], :, None] * comp.F[:, comp_idx[:, 0]].T[:, None, :]
    k_mat = outer.reshape(required, -1).T
    s = singular_values(k_mat)
    rank_k = int((s > rtol * s[0]).sum()) if s[0] > 0 else 0
    well_posed = rank_k == required
    if well_posed:
        # dimension argument: a certified rank never exceeds the generic bound
        assert r <= bounds.R_value + 1e-9
    return WellPosednessReport(
        r=r, rank_of_K=rank_k, required_rank=required, well_posed=well_posed,
        dimension_ok=True, min_counts_ok=min_counts_ok, irreducible=irreducible,
        generic_rank_bound=bounds.R_value, tol_used=rtol,
    )


def project_tangent(w_in: ObservedMatrix, y, r: int, weights=None,
                    rtol: float = DEFAULT_RANK_RTOL) -> np.ndarray:
    """Weighted projection of observed values onto the tangent space at Y.

    Returns the dense H in the tangent space minimizing
    sum over observed (i,j) of weights_ij * (w_in_ij - H_ij)^2.
    Raises ValueError when the restricted tangent basis is rank deficient,
    which is exactly the failure of well-posedness.
    """
    y = as_matrix(y)
    if y.shape != w_in.pattern.shape:
        raise ValueError("matrix shape does not match pattern")
    basis = tangent_basis(y, r, rtol)
    design = basis.matrices_on(w_in.pattern)
    rhs = w_in.values
    if weights is not None:
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape[0] != w_in.pattern.m or (weights <= 0).any():
            raise ValueError("weights must be positive, one per observed entry")
        root = np.sqrt(weights)
        design = design * root[:, None]
        rhs = rhs * root
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    if s[0] == 0.0 or int((s > rtol * s[0]).sum()) < basis.dim:
        raise ValueError("tangent projection is ill-posed for this pattern (not well-posed)")
    coeffs = vt.T @ ((u.T @ rhs) / s)
    return np.tensordot(coeffs, basis.basis, axes=1)


def jacobian(v, w, p: ObservationPattern) -> np.ndarray:
    """Jacobian of (V, W, X) -> V W^T + X as rows of partial derivatives.

    Shape (n1 r + n2 r + |complement|) x (n1 n2); output coordinates are
    column-major vec. Rows come in blocks: V entries (column-major over V),
    W entries, then one canonical unit per unobserved position. The value
    of X never enters, so it is not a parameter here.
    """
    v = as_matrix(v, "V")
    w = as_matrix(w, "W")
    n1, r = v.shape
    n2, r2 = w.shape
    if r != r2:
        raise ValueError(f"factor ranks differ: {r} vs {r2}")
    if (n1, n2) != p.shape:
        raise ValueError("factor dimensions do not match pattern")
    comp_idx = p.complement_indices()
    rows = n1 * r + n2 * r + comp_idx.shape[0]
    jac = np.zeros((rows, n1 * n2))
    k = 0
    # d/dV_ac (V W^T) = e_a w_c^T, vec = W[:, c] (x) e_a
    for c in range(r):
        for a in range(n1):
            jac[k, a::n1] = w[:, c]
            k += 1
    # d/dW_bc (V W^T) = V[:, c] e_b^T, vec lands in column block b
    for c in range(r):
        for b in range(n2):
            jac[k, b * n1:(b + 1) * n1] = v[:, c]
            k += 1
    for i, j in comp_idx:
        jac[k, j * n1 + i] = 1.0
        k += 1
    return jac


@dataclass(frozen=True)
class CharRankResult:
    """Monte Carlo estimate of the characteristic rank of the completion map."""

    rho: int
    f_rm: int
    trials: int
    ranks_per_trial: list
    generic_well_posed: bool
    tol_used: float

    @property
    def stable(self) -> bool:
        """True when every trial saw the same rank (regularity evidence)."""
        return len(set(self.ranks_per_trial)) == 1


def characteristic_rank(p: ObservationPattern, r: int, trials: int = 5,
                        seed: int = 0, rtol: float = DEFAULT_RANK_RTOL) -> CharRankResult:
    """Maximal Jacobian rank over Gaussian factor draws.

    Equality of rho with f(r, m) = r(n1+n2-r) + n1 n2 - m characterizes
    generic well-posedness. Regularity of any single draw cannot be
    certified, so the per-trial ranks are reported as stability evidence.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 < r <= min(p.n1, p.n2):
        raise ValueError(f"r must be in [1, {min(p.n1, p.n2)}]")
    f_rm = generic_bound(p).f_rm(r)
    ranks = []
    for t in range(trials):
        rng = np.random.default_rng((seed, t))
        v = rng.standard_normal((p.n1, r))
        w = rng.standard_normal((p.n2, r))
        s = singular_values(jacobian(v, w, p))
        ranks.append(int((s > rtol * s[0]).sum()) if s[0] > 0 else 0)
    rho = max(ranks)
    return CharRankResult(
        rho=rho, f_rm=f_rm, trials=trials, ranks_per_trial=ranks,
        generic_well_posed=(rho == f_rm), tol_used=rtol,
    )
