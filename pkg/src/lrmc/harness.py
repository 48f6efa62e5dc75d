"""Simulation harness: random instances and the experiment suite.

Everything here is a pure function of its arguments; replication k of an
experiment seeded with s draws from ``default_rng((s, ..., k))``, so
results are bit-reproducible and replications are order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import wellposedness_check
from .linalg import orthonormalize
from .patterns import ObservationPattern, ObservedMatrix, estimated_bound, row_col_counts
from .solvers import (
    SolverConfig,
    lrma_fixed_rank,
    nuclear_norm_complete,
    rank_from_singular_values,
)
from .stats import NoiseModel, chi2_quantile, degrees_of_freedom, nested_test, \
    sequential_rank_test, test_statistic


def derive_seed(*parts) -> tuple:
    """Flatten seed components into the flat integer tuple the RNG accepts."""
    out: list[int] = []
    for p in parts:
        if isinstance(p, (tuple, list)):
            out.extend(derive_seed(*p))
        else:
            out.append(int(p))
    return tuple(out)


@dataclass
class InstanceSpec:
    """Recipe for one random low-rank observation problem.

    Exactly one of p (Bernoulli sampling) and m (fixed cardinality,
    uniform without replacement) must be set. Singular values of the
    truth are drawn uniform from d_range; the default keeps them well
    separated from zero so rank decisions are tolerance-robust and the
    quadratic approximation behind the chi-square law is accurate at the
    default noise scales.
    """

    n1: int
    n2: int
    r_true: int
    p: float | None = None
    m: int | None = None
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    d_range: tuple[float, float] = (12.0, 24.0)

    def __post_init__(self):
        if not 1 <= self.r_true <= min(self.n1, self.n2):
            raise ValueError("r_true must be in [1, min(n1, n2)]")
        if (self.p is None) == (self.m is None):
            raise ValueError("set exactly one of p and m")
        if self.p is not None and not 0 < self.p <= 1:
            raise ValueError("p must be in (0, 1]")
        if self.m is not None and not 1 <= self.m <= self.n1 * self.n2:
            raise ValueError("m must be in [1, n1*n2]")
        if not 0 < self.d_range[0] <= self.d_range[1]:
            raise ValueError("d_range must be positive and ordered")


class Instance(NamedTuple):
    y_star: np.ndarray
    observed: ObservedMatrix
    empty_rows: tuple
    empty_cols: tuple


def _sample_pattern(spec: InstanceSpec, rng: np.random.Generator) -> ObservationPattern:
    if spec.p is not None:
        mask = rng.random((spec.n1, spec.n2)) < spec.p
        if not mask.any():
            raise ValueError("Bernoulli draw produced an empty pattern; increase p")
        return ObservationPattern.from_mask(mask)
    flat = rng.choice(spec.n1 * spec.n2, size=spec.m, replace=False)
    entries = [divmod(int(t), spec.n2) for t in flat]
    return ObservationPattern(spec.n1, spec.n2, entries)


def gen_instance(spec: InstanceSpec) -> Instance:
    """Draw (Y*, observed M) for an InstanceSpec, seeded by spec.seed.

    Y* = V D W^T with V, W orthonormalized Gaussian factors and D drawn
    uniformly from spec.d_range; M restricts Y* + drift/sqrt(N) + noise
    to the sampled pattern. Patterns with empty rows or columns are not
    rejected; they are reported through the metadata fields.
    """
    rng = np.random.default_rng(derive_seed(spec.seed))
    v = orthonormalize(rng.standard_normal((spec.n1, spec.r_true)))
    w = orthonormalize(rng.standard_normal((spec.n2, spec.r_true)))
    d = rng.uniform(spec.d_range[0], spec.d_range[1], size=spec.r_true)
    y_star = (v * d) @ w.T

    pattern = _sample_pattern(spec, rng)
    ii, jj = pattern.indices[:, 0], pattern.indices[:, 1]
    values = y_star[ii, jj].copy()

    noise = spec.noise
    root_n = np.sqrt(noise.N)
    if noise.drift is not None:
        drift = np.asarray(noise.drift, dtype=float)
        values += (drift[ii, jj] if drift.ndim == 2 else drift) / root_n
    sig = np.asarray(noise.sigma, dtype=float).ravel()
    if sig.size not in (1, pattern.m):
        raise ValueError("sigma must be scalar or one value per observed entry")
    if (sig > 0).any():
        values += rng.standard_normal(pattern.m) * (sig / root_n)

    rows, cols = row_col_counts(pattern)
    return Instance(
        y_star=y_star,
        observed=ObservedMatrix(pattern, values),
        empty_rows=tuple(np.flatnonzero(rows == 0)),
        empty_cols=tuple(np.flatnonzero(cols == 0)),
    )


@dataclass(frozen=True)
class ExperimentResult:
    """Grid of aggregated outcomes, serialization-ready.

    grid maps axis names to their tick values, in the order of the axes
    of values. extras carries auxiliary series (bound curves, per-method
    tables) keyed by name.
    """

    name: str
    grid: dict
    values: np.ndarray
    replications: int
    seeds: dict
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != len(self.grid):
            raise ValueError("values dimensions must match grid axes")
        for ax, (k, ticks) in zip(self.values.shape, self.grid.items()):
            if ax != len(ticks):
                raise ValueError(f"axis {k} has {len(ticks)} ticks but values span {ax}")

    def csv_rows(self):
        """Header plus one row per grid cell: axis ticks, value, reps."""
        axes = list(self.grid.keys())
        yield axes + ["value", "replications"]
        ticks = [self.grid[a] for a in axes]
        for idx in np.ndindex(self.values.shape):
            row = [ticks[d][i] for d, i in enumerate(idx)]
            yield row + [float(self.values[idx]), self.replications]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "grid": {k: list(v) for k, v in self.grid.items()},
            "values": self.values.tolist(),
            "replications": self.replications,
            "seeds": self.seeds,
            "extras": {k: np.asarray(v).tolist() for k, v in self.extras.items()},
        }


def wellposed_probability(n1: int, n2: int, r_list, p_list, reps: int = 50,
                          seed: int = 0, rtol: float = 1e-9) -> ExperimentResult:
    """Fraction of random instances certified well-posed, per (r, p) cell.

    Truths use plain orthonormal factors (Y* = V W^T) and Bernoulli
    patterns. The estimated generic bound for each p rides along in the
    extras, since the fraction collapses to zero right above it.
    """
    r_list = [int(r) for r in r_list]
    p_list = [float(p) for p in p_list]
    values = np.zeros((len(r_list), len(p_list)))
    for a, r in enumerate(r_list):
        for b, p in enumerate(p_list):
            good = 0
            for k in range(reps):
                rng = np.random.default_rng((seed, a, b, k))
                v = orthonormalize(rng.standard_normal((n1, r)))
                w = orthonormalize(rng.standard_normal((n2, r)))
                mask = rng.random((n1, n2)) < p
                if not mask.any():
                    continue
                pattern = ObservationPattern.from_mask(mask)
                report = wellposedness_check(v @ w.T, r, pattern, rtol=rtol)
                good += report.well_posed
            values[a, b] = good / reps
    return ExperimentResult(
        name="wellposed_probability",
        grid={"r": r_list, "p": p_list},
        values=values,
        replications=reps,
        seeds={"seed": seed, "derivation": "default_rng((seed, r_index, p_index, rep))"},
        extras={"estimated_bound": np.array([estimated_bound(n1, n2, p) for p in p_list]),
                "rtol": rtol},
    )


def mse_compare(n1: int, n2: int, r_list, p_list, noise: NoiseModel, reps: int = 50,
                seed: int = 0, cfg: SolverConfig | None = None,
                tau: float | None = None) -> ExperimentResult:
    """MSE difference (rank-constrained fit minus nuclear relaxation).

    Each cell averages (n1 n2 reps)^-1 sum of squared recovery errors over
    replications; the emitted value is MSE_lrma - MSE_nuclear, negative
    where the fixed-rank fit wins. Per-method tables sit in extras.
    """
    r_list = [int(r) for r in r_list]
    p_list = [float(p) for p in p_list]
    mse = np.zeros((2, len(r_list), len(p_list)))
    for a, r in enumerate(r_list):
        for b, p in enumerate(p_list):
            err_l = err_n = 0.0
            for k in range(reps):
                spec = InstanceSpec(n1, n2, r, p=p, noise=noise, seed=derive_seed(seed, a, b, k))
                inst = gen_instance(spec)
                y_l = lrma_fixed_rank(inst.observed, r, cfg).Y_hat
                y_n = nuclear_norm_complete(inst.observed, cfg, tau=tau).Y_hat
                err_l += float(np.sum((inst.y_star - y_l) ** 2))
                err_n += float(np.sum((inst.y_star - y_n) ** 2))
            denom = n1 * n2 * reps
            mse[0, a, b] = err_l / denom
            mse[1, a, b] = err_n / denom
    return ExperimentResult(
        name="mse_compare",
        grid={"r": r_list, "p": p_list},
        values=mse[0] - mse[1],
        replications=reps,
        seeds={"seed": seed, "derivation": "default_rng((seed, r_index, p_index, rep))"},
        extras={"mse_lrma": mse[0], "mse_nuclear": mse[1],
                "estimated_bound": np.array([estimated_bound(n1, n2, p) for p in p_list])},
    )


def resample_until_wellposed(spec: InstanceSpec, r: int, max_draws: int = 100,
                             rtol: float = 1e-9) -> Instance:
    """Redraw the pattern (seed, attempt) until Y* is well-posed at rank r."""
    for attempt in range(max_draws):
        inst = gen_instance(
            InstanceSpec(spec.n1, spec.n2, spec.r_true, p=spec.p, m=spec.m,
                         noise=spec.noise, seed=derive_seed(spec.seed, attempt),
                         d_range=spec.d_range))
        if wellposedness_check(inst.y_star, r, inst.observed.pattern, rtol=rtol).well_posed:
            return inst
    raise RuntimeError(f"no well-posed pattern found in {max_draws} draws")


def qq_data(spec: InstanceSpec, r: int, reps: int = 200,
            cfg: SolverConfig | None = None, nested_extra: int = 0) -> ExperimentResult:
    """Sorted test statistics against chi-square quantiles on a fixed truth.

    One well-posed (Y*, pattern) pair is drawn, then reps independent
    noise replications produce T_N(r); the empirical order statistics are
    paired with chi-square quantiles at plotting positions (k - 1/2) / reps.
    With nested_extra > 0 the emitted statistic is the difference between
    the pattern enlarged by that many entries and the original, with
    matching degrees of freedom.
    """
    cfg = cfg or SolverConfig()
    base = resample_until_wellposed(spec, r)
    pattern = base.observed.pattern
    n1, n2 = spec.n1, spec.n2

    if nested_extra > 0:
        rng = np.random.default_rng(derive_seed(spec.seed, 2**32 - 1))
        free = [divmod(int(t), n2) for t in rng.permutation(n1 * n2)
                if not pattern.mask[divmod(int(t), n2)]][:nested_extra]
        if len(free) < nested_extra:
            raise ValueError("not enough unobserved entries to enlarge the pattern")
        big = ObservationPattern(n1, n2, [tuple(t) for t in pattern.indices] + free)
        df = big.m - pattern.m
        work = big
    else:
        big = None
        df = degrees_of_freedom(r, n1, n2, pattern.m)
        work = pattern
        if df <= 0:
            raise ValueError("no degrees of freedom left at this rank")

    ii, jj = work.indices[:, 0], work.indices[:, 1]
    clean = base.y_star[ii, jj]
    sig = np.asarray(spec.noise.sigma, dtype=float).ravel()
    stats = np.empty(reps)
    for k in range(reps):
        rng = np.random.default_rng(derive_seed(spec.seed, k))
        values = clean + rng.standard_normal(work.m) * (sig / np.sqrt(spec.noise.N))
        m_obs = ObservedMatrix(work, values)
        if nested_extra > 0:
            delta_t, _ = nested_test(m_obs, pattern, r, spec.noise, cfg)
            stats[k] = delta_t
        else:
            stats[k] = test_statistic(m_obs, r, spec.noise, cfg)
    stats.sort()
    positions = (np.arange(1, reps + 1) - 0.5) / reps
    quantiles = np.array([chi2_quantile(q, df) for q in positions])
    return ExperimentResult(
        name="qq_nested" if nested_extra else "qq_data",
        grid={"position": list(positions), "column": ["T_N", "chi2_quantile"]},
        values=np.column_stack([stats, quantiles]),
        replications=reps,
        seeds={"seed": spec.seed, "derivation": "default_rng((seed, rep))"},
        extras={"df": df, "r": r},
    )


def rank_selection_compare(n1: int, n2: int, r_list, sampling: float | int,
                           noise: NoiseModel, reps: int = 50, thresholds=(0.25, 0.5, 0.9),
                           seed: int = 0, alpha: float = 0.05,
                           cfg: SolverConfig | None = None) -> ExperimentResult:
    """Median |selected rank - true rank| for the test vs threshold rules.

    sampling is a Bernoulli probability if fractional, a fixed cardinality
    if integral. Column 0 is the sequential chi-square test at the given
    alpha (a scan that rejects everything counts as cap + 1, the most
    pessimistic reading); the remaining columns threshold the singular
    value mass of the nuclear-norm completion at each level in thresholds.
    """
    r_list = [int(r) for r in r_list]
    thresholds = [float(b) for b in thresholds]
    methods = ["sequential"] + [f"threshold_{b:g}" for b in thresholds]
    values = np.zeros((len(r_list), len(methods)))
    is_prob = isinstance(sampling, float) and sampling <= 1.0
    for a, r_true in enumerate(r_list):
        errs = np.zeros((reps, len(methods)))
        for k in range(reps):
            spec = InstanceSpec(
                n1, n2, r_true,
                p=sampling if is_prob else None,
                m=None if is_prob else int(sampling),
                noise=noise, seed=derive_seed(seed, a, k))
            inst = gen_instance(spec)
            report = sequential_rank_test(inst.observed, noise, alpha=alpha, cfg=cfg)
            cap = report.rows[-1].r if report.rows else 0
            r_hat = report.selected_rank if report.selected_rank is not None else cap + 1
            errs[k, 0] = abs(r_hat - r_true)
            y_nuc = nuclear_norm_complete(inst.observed, cfg).Y_hat
            for t, b in enumerate(thresholds):
                errs[k, 1 + t] = abs(rank_from_singular_values(y_nuc, b) - r_true)
        values[a] = np.median(errs, axis=0)
    return ExperimentResult(
        name="rank_selection_compare",
        grid={"r_true": r_list, "method": methods},
        values=values,
        replications=reps,
        seeds={"seed": seed, "derivation": "default_rng((seed, r_index, rep))"},
        extras={"alpha": alpha},
    )


# --- Wilson fixture ---

_WILSON_OFFDIAG = np.array([
    [0.00, 0.56, 0.16, 0.48, 0.24, 0.64],
    [0.56, 0.00, 0.20, 0.66, 0.51, 0.86],
    [0.16, 0.20, 0.00, 0.18, 0.07, 0.23],
    [0.48, 0.66, 0.18, 0.00, 0.30, 0.72],
    [0.24, 0.51, 0.07, 0.30, 0.00, 0.41],
    [0.64, 0.86, 0.23, 0.72, 0.41, 0.00],
])

_WILSON_DIAG_1 = np.array([0.64, 0.85, 0.06, 0.56, 0.50, 0.93])

# second completion to full precision; the published two-decimal rounding
# of these values is not rank 3 to machine accuracy, these are
_WILSON_DIAG_2 = np.array([
    432.0 / 1015.0,   # 0.4256...
    1173.0 / 1300.0,  # 0.9023...
    311.0 / 4900.0,   # 0.0634...
    711.0 / 1300.0,   # 0.5469...
    29.0 / 75.0,      # 0.3866...
    499.0 / 500.0,    # 0.998
])


def wilson_fixture() -> tuple[ObservedMatrix, tuple[np.ndarray, np.ndarray]]:
    """The classic 6x6 correlation completion problem.

    All thirty off-diagonal entries are observed; the diagonal is free.
    Returns the observed matrix and two distinct rank-3 completions, a
    demonstration that m at the generic bound does not make the
    completion unique. Both completions are symmetric and reproduce the
    observed entries exactly.
    """
    mask = ~np.eye(6, dtype=bool)
    observed = ObservedMatrix.from_dense(_WILSON_OFFDIAG, mask=mask)
    first = _WILSON_OFFDIAG + np.diag(_WILSON_DIAG_1)
    second = _WILSON_OFFDIAG + np.diag(_WILSON_DIAG_2)
    return observed, (first, second)
