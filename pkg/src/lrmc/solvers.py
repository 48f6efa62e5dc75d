"""Completion algorithms.

Four routes to a completed matrix, in increasing order of assumptions:

* ``lrma_fixed_rank``: least-squares fit at a prescribed rank via
  impute-and-project (alternating weighted least squares when weights vary).
* ``rank_one_complete``: exact propagation for rank one, unique on
  irreducible patterns with nonzero data.
* ``schur_cascade``: entry-by-entry exact completion through Schur
  complements of (r+1) x (r+1) minors, whenever the pattern admits them.
* ``nuclear_norm_complete``: singular value thresholding for the convex
  relaxation min ||Y||_* subject to agreement on the observed entries.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, singular_values
from .patterns import ObservedMatrix, is_reducible


@dataclass
class SolverConfig:
    """Knobs shared by the iterative solvers.

    tol is a relative stopping threshold: Frobenius change between
    successive iterates for lrma_fixed_rank, constraint violation for
    nuclear_norm_complete. weights, when given, is one positive value per
    observed entry aligned with the pattern. seed switches initialization
    from the deterministic zero-fill to a Gaussian draw (for restarts).
    """

    tol: float = 1e-10
    max_iter: int = 50000
    weights: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float).ravel()
            if (self.weights <= 0).any() or not np.isfinite(self.weights).all():
                raise ValueError("weights must be positive and finite")


@dataclass(frozen=True)
class SolveResult:
    Y_hat: np.ndarray
    fit: float
    iterations: int
    converged: bool
    optimality_residuals: tuple[float, float]


def optimality_residual(y, m: ObservedMatrix, weights=None) -> tuple[float, float]:
    """First-order stationarity diagnostics (||R^T Y||_F, ||Y R^T||_F).

    R is the observed-entry residual P_Omega(Y) - M, optionally scaled by
    the weights. Both norms vanish at any stationary point of the
    least-squares objective, in particular at every local minimum.
    """
    y = as_matrix(y, "Y")
    resid = m.residual_on_pattern(y)
    if weights is not None:
        resid = resid * np.asarray(weights, dtype=float).ravel()
    r_dense = np.zeros(m.pattern.shape)
    r_dense[m.pattern.indices[:, 0], m.pattern.indices[:, 1]] = resid
    return (
        float(np.linalg.norm(r_dense.T @ y)),
        float(np.linalg.norm(y @ r_dense.T)),
    )


def _truncated_svd(a: np.ndarray, r: int) -> np.ndarray:
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return (u[:, :r] * s[:r]) @ vt[:r, :]


def _equal_weights(w: np.ndarray | None) -> float | None:
    """The common value when all weights coincide, else None."""
    if w is None:
        return 1.0
    return float(w[0]) if np.all(w == w[0]) else None


def lrma_fixed_rank(m: ObservedMatrix, r: int, cfg: SolverConfig | None = None) -> SolveResult:
    """Least-squares completion at fixed rank r.

    Unit (or constant) weights run impute-and-project: fill the missing
    entries with the current iterate, truncate to rank r, repeat, with
    Nesterov momentum and a restart to the plain step whenever the
    extrapolated fit would rise, so the fit is nonincreasing. Varying
    weights fall back to alternating weighted least squares over the
    rows of the two factors.
    """
    cfg = cfg or SolverConfig()
    n1, n2 = m.pattern.shape
    if r < 0 or r > min(n1, n2):
        raise ValueError(f"r must be in [0, {min(n1, n2)}]")
    w = cfg.weights
    if w is not None and w.shape[0] != m.pattern.m:
        raise ValueError("weights must have one value per observed entry")
    if r == 0:
        fit = float(np.sum((w if w is not None else 1.0) * m.values**2))
        return SolveResult(np.zeros((n1, n2)), fit, 0, True, (0.0, 0.0))
    scale = _equal_weights(w)
    if scale is not None:
        result = _impute_and_project(m, r, cfg)
        if scale != 1.0:
            result = SolveResult(result.Y_hat, scale * result.fit, result.iterations,
                                 result.converged, result.optimality_residuals)
        return result
    return _alternating_wls(m, r, cfg)


def _initial_iterate(m: ObservedMatrix, r: int, seed: int | None) -> np.ndarray:
    if seed is None:
        return np.zeros(m.pattern.shape)
    rng = np.random.default_rng(seed)
    scale = float(np.abs(m.values).mean()) or 1.0
    return scale * rng.standard_normal(m.pattern.shape)


def _impute_and_project(m: ObservedMatrix, r: int, cfg: SolverConfig) -> SolveResult:
    # Nesterov extrapolation on top of the plain fill-and-truncate step.
    # The plain step never increases the fit, so whenever the extrapolated
    # step would, we discard it and take the plain one (monotone restart).
    # Near the identifiability boundary the plain iteration contracts at a
    # rate arbitrarily close to 1 and stalls; the momentum variant squares
    # the effective rate exponent and converges in practice.
    ii, jj = m.pattern.indices[:, 0], m.pattern.indices[:, 1]
    y = _truncated_svd(_fill(m, _initial_iterate(m, r, cfg.seed)), r)
    fit = float(np.sum((m.values - y[ii, jj]) ** 2))
    y_prev = y
    t_k = 1.0
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iter + 1):
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k)) / 2.0
        z = y + ((t_k - 1.0) / t_next) * (y - y_prev)
        y_new = _truncated_svd(_fill(m, z), r)
        fit_new = float(np.sum((m.values - y_new[ii, jj]) ** 2))
        if fit_new > fit:
            y_new = _truncated_svd(_fill(m, y), r)
            fit_new = float(np.sum((m.values - y_new[ii, jj]) ** 2))
            t_next = 1.0
            assert fit_new <= fit * (1 + 1e-12) + 1e-15, "impute-and-project fit increased"
        num = np.linalg.norm(y_new - y)
        den = np.linalg.norm(y)
        y_prev, y, fit, t_k = y, y_new, fit_new, t_next
        if den > 0 and num < cfg.tol * den:
            converged = True
            break
    return SolveResult(y, fit, iterations, converged, optimality_residual(y, m))


def _fill(m: ObservedMatrix, y: np.ndarray) -> np.ndarray:
    filled = y.copy()
    filled[m.pattern.indices[:, 0], m.pattern.indices[:, 1]] = m.values
    return filled


def _alternating_wls(m: ObservedMatrix, r: int, cfg: SolverConfig) -> SolveResult:
    n1, n2 = m.pattern.shape
    ii, jj = m.pattern.indices[:, 0], m.pattern.indices[:, 1]
    w = cfg.weights
    root = np.sqrt(w)
    by_row = [np.flatnonzero(ii == i) for i in range(n1)]
    by_col = [np.flatnonzero(jj == j) for j in range(n2)]

    u, s, vt = np.linalg.svd(_fill(m, _initial_iterate(m, r, cfg.seed)), full_matrices=False)
    v_fac = u[:, :r] * np.sqrt(s[:r])
    w_fac = vt[:r, :].T * np.sqrt(s[:r])

    def solve_rows(fixed, own_n, groups, col_of):
        out = np.zeros((own_n, r))
        for i in range(own_n):
            rows = groups[i]
            if rows.size == 0:
                continue
            a = fixed[col_of[rows], :] * root[rows, None]
            b = m.values[rows] * root[rows]
            out[i], *_ = np.linalg.lstsq(a, b, rcond=None)
        return out

    y = v_fac @ w_fac.T
    fit = float(np.sum(w * (m.values - y[ii, jj]) ** 2))
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iter + 1):
        v_fac = solve_rows(w_fac, n1, by_row, jj)
        w_fac = solve_rows(v_fac, n2, by_col, ii)
        y_new = v_fac @ w_fac.T
        fit_new = float(np.sum(w * (m.values - y_new[ii, jj]) ** 2))
        assert fit_new <= fit * (1 + 1e-12) + 1e-15, "alternating least squares fit increased"
        num = np.linalg.norm(y_new - y)
        den = np.linalg.norm(y)
        y, fit = y_new, fit_new
        if den > 0 and num < cfg.tol * den:
            converged = True
            break
    return SolveResult(y, fit, iterations, converged, optimality_residual(y, m, w))


def rank_one_complete(m: ObservedMatrix, rel_tol: float = 1e-9) -> np.ndarray:
    """Exact rank-one completion by multiplicative propagation.

    Fixes v_1 = 1 and walks the bipartite graph of rows and columns:
    every observed entry whose row value is known determines its column
    value and vice versa. Requires an irreducible pattern (otherwise the
    blocks decouple and the completion is not unique), no zero entries,
    and data consistent with rank one.
    """
    if (m.values == 0).any():
        k = int(np.flatnonzero(m.values == 0)[0])
        i, j = m.pattern.indices[k]
        raise ValueError(f"rank-one propagation requires nonzero entries; M[{i},{j}] = 0")
    red = is_reducible(m.pattern)
    if red.empty_rows or red.empty_cols:
        raise ValueError(
            f"every row and column needs an observation; empty rows {red.empty_rows}, "
            f"empty columns {red.empty_cols}")
    if red.reducible:
        raise ValueError(
            f"pattern is reducible ({red.n_components} blocks); a rank-one completion "
            "exists per block but is not unique overall")
    n1, n2 = m.pattern.shape
    dense = m.to_dense()
    row_adj = [[] for _ in range(n1)]
    col_adj = [[] for _ in range(n2)]
    for i, j in m.pattern.indices:
        row_adj[i].append(j)
        col_adj[j].append(i)
    v = np.full(n1, np.nan)
    w = np.full(n2, np.nan)
    v[0] = 1.0
    queue = deque([("row", 0)])
    while queue:
        kind, a = queue.popleft()
        if kind == "row":
            for j in row_adj[a]:
                if np.isnan(w[j]):
                    w[j] = dense[a, j] / v[a]
                    queue.append(("col", j))
        else:
            for i in col_adj[a]:
                if np.isnan(v[i]):
                    v[i] = dense[i, a] / w[a]
                    queue.append(("row", i))
    y = np.outer(v, w)
    recon = y[m.pattern.indices[:, 0], m.pattern.indices[:, 1]]
    bad = np.abs(recon - m.values) > rel_tol * np.abs(m.values)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        i, j = m.pattern.indices[k]
        raise ValueError(
            f"no exact rank-one completion: entry ({i},{j}) = {m.values[k]:.12g} "
            f"but propagation forces {recon[k]:.12g}")
    return y


_COND_LIMIT = 1e12


def schur_complete_entry(m: ObservedMatrix, k: int, l: int, i1, i2) -> float:
    """The unique value at (k, l) forcing the bordered minor to be singular.

    With rows I1 and columns I2 fully observed along with row k over I2
    and column l over I1, the (r+1) x (r+1) minor on (I1 + {k}) x (I2 + {l})
    of a rank-r matrix must be rank deficient, which pins
    Y_kl = M[k, I2] M[I1, I2]^{-1} M[I1, l].
    """
    i1 = list(i1)
    i2 = list(i2)
    if len(i1) != len(i2):
        raise ValueError("index sets I1 and I2 must have equal size")
    dense = m.to_dense()
    mask = m.pattern.mask
    if mask[k, l]:
        raise ValueError(f"({k},{l}) is observed; nothing to complete")
    needed = [(i, j) for i in i1 for j in i2] + [(k, j) for j in i2] + [(i, l) for i in i1]
    for i, j in needed:
        if not mask[i, j]:
            raise ValueError(f"required entry ({i},{j}) is not observed")
    core = dense[np.ix_(i1, i2)]
    if np.linalg.cond(core) > _COND_LIMIT:
        raise ValueError("pivot minor M[I1, I2] is singular or too ill-conditioned")
    return float(dense[k, i2] @ np.linalg.solve(core, dense[i1, l]))


def _minor_candidates(rows, cols, r, known, exhaustive, max_attempts):
    """Yield (I1, I2) pairs with the known-submatrix property, best first."""
    if not exhaustive:
        # greedy: prefer rows/columns with the most known crossings
        rows = sorted(rows, key=lambda i: -sum(known[i, j] for j in cols))
        cols = sorted(cols, key=lambda j: -sum(known[i, j] for i in rows))
    attempts = 0
    for i1 in itertools.combinations(rows, r):
        for i2 in itertools.combinations(cols, r):
            if attempts >= max_attempts:
                return
            attempts += 1
            if all(known[i, j] for i in i1 for j in i2):
                yield i1, i2


def schur_cascade(m: ObservedMatrix, r: int,
                  max_subset_search: int = 2000) -> tuple[np.ndarray, set]:
    """Fill unobserved entries by repeated Schur-complement steps.

    Any entry admitting a pivot minor among currently known values is
    filled; newly filled entries become available pivots, and the sweep
    repeats to a fixpoint. The search over candidate (I1, I2) is
    exhaustive for r <= 2 and coverage-greedy above, capped at
    max_subset_search combinations per entry per sweep. Entries the
    cascade cannot reach stay zero and are absent from the returned set.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    n1, n2 = m.pattern.shape
    dense = np.zeros((n1, n2))
    dense[m.pattern.indices[:, 0], m.pattern.indices[:, 1]] = m.values
    known = m.pattern.mask.copy()
    filled: set = set()
    todo = [tuple(t) for t in np.argwhere(~known)]
    exhaustive = r <= 2
    progress = True
    while progress and todo:
        progress = False
        remaining = []
        for k, l in todo:
            rows = [i for i in range(n1) if i != k and known[i, l]]
            cols = [j for j in range(n2) if j != l and known[k, j]]
            value = None
            if len(rows) >= r and len(cols) >= r:
                for i1, i2 in _minor_candidates(rows, cols, r, known,
                                                exhaustive, max_subset_search):
                    core = dense[np.ix_(i1, i2)]
                    if np.linalg.cond(core) > _COND_LIMIT:
                        continue
                    value = float(dense[k, list(i2)] @ np.linalg.solve(core, dense[list(i1), l]))
                    break
            if value is None:
                remaining.append((k, l))
            else:
                dense[k, l] = value
                known[k, l] = True
                filled.add((k, l))
                progress = True
        todo = remaining
    return dense, filled


def nuclear_norm_complete(m: ObservedMatrix, cfg: SolverConfig | None = None,
                          tau: float | None = None,
                          delta: float | None = None) -> SolveResult:
    """Nuclear-norm completion by accelerated singular value thresholding.

    Runs proximal ascent on the dual of min tau ||Y||_* + ||Y||_F^2 / 2
    subject to agreement on the observed entries, with Nesterov momentum
    and gradient-based adaptive restart. Large tau approximates the pure
    nuclear-norm minimizer (the gap decays like 1/tau). fit reports the
    relative constraint violation ||P_Omega(Y) - M||_F / ||M||_F.

    tau defaults to 5 sqrt(n1 n2) mean|M_ij| and the nominal step delta
    to 1.2 n1 n2 / m; the momentum scheme is stable only for steps <= 1,
    so the effective step is min(delta, 1).
    """
    cfg = cfg or SolverConfig()
    n1, n2 = m.pattern.shape
    ii, jj = m.pattern.indices[:, 0], m.pattern.indices[:, 1]
    if tau is None:
        tau = 5.0 * np.sqrt(n1 * n2) * float(np.abs(m.values).mean())
    if delta is None:
        delta = 1.2 * n1 * n2 / m.pattern.m
    step = min(float(delta), 1.0)
    norm_m = float(np.linalg.norm(m.values))
    if norm_m == 0.0:
        return SolveResult(np.zeros((n1, n2)), 0.0, 0, True, (0.0, 0.0))

    p_m = np.zeros((n1, n2))
    p_m[ii, jj] = m.values
    k0 = int(np.ceil(tau / (step * singular_values(p_m)[0])))
    x = k0 * step * p_m
    z = x.copy()
    t_k = 1.0
    y = np.zeros((n1, n2))
    violation = 1.0
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iter + 1):
        u, s, vt = np.linalg.svd(z, full_matrices=False)
        y = (u * np.maximum(s - tau, 0.0)) @ vt
        resid = m.values - y[ii, jj]
        violation = float(np.linalg.norm(resid)) / norm_m
        if violation < cfg.tol:
            converged = True
            break
        r_dense = np.zeros((n1, n2))
        r_dense[ii, jj] = resid
        x_new = z + step * r_dense
        if float(np.sum(r_dense * (x_new - x))) < 0.0:
            t_k = 1.0
            z = x_new
        else:
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k)) / 2.0
            z = x_new + ((t_k - 1.0) / t_next) * (x_new - x)
            t_k = t_next
        x = x_new
    return SolveResult(y, violation, iterations, converged, optimality_residual(y, m))


def rank_from_singular_values(y, b: float) -> int:
    """Smallest r whose leading singular values carry more than fraction b.

    Accepts a matrix or a precomputed 1-D vector of singular values.
    Returns 0 for an identically zero input.
    """
    if not 0 < b < 1:
        raise ValueError("b must be in (0, 1)")
    y = np.asarray(y, dtype=float)
    s = np.sort(np.abs(y))[::-1] if y.ndim == 1 else singular_values(y)
    total = s.sum()
    if total == 0:
        return 0
    frac = np.cumsum(s) / total
    return int(np.argmax(frac > b)) + 1 if (frac > b).any() else s.size
