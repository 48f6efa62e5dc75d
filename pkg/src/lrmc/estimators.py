"""Estimator-style wrappers with the scikit-learn fit/transform calling
convention. Missing entries are NaN, as with the sklearn imputers.

These are thin adapters over the functional core (solvers, stats); use
that directly when you already hold ObservedMatrix objects.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .patterns import ObservedMatrix
from .solvers import (
    SolverConfig,
    lrma_fixed_rank,
    nuclear_norm_complete,
    rank_from_singular_values,
    rank_one_complete,
    schur_cascade,
)
from .stats import NoiseModel, noise_from_replications, sequential_rank_test

_METHODS = ("lrma", "nuclear", "rank1", "schur")


def _observed_from_nan(x) -> tuple[np.ndarray, ObservedMatrix]:
    x = check_array(x, dtype=np.float64, ensure_all_finite="allow-nan")
    mask = ~np.isnan(x)
    if not mask.any():
        raise ValueError("input has no observed entries")
    return x, ObservedMatrix.from_dense(x)


class MatrixCompleter(TransformerMixin, BaseEstimator):
    """Complete a partially observed matrix; NaN marks missing cells.

    Parameters
    ----------
    method : {"lrma", "nuclear", "rank1", "schur"}
        lrma is the fixed-rank least-squares fit, nuclear the convex
        relaxation, rank1 exact multiplicative propagation, schur the
        exact minor-based cascade.
    rank : int, optional
        Target rank; required for lrma and schur.
    tol, max_iter : float, int
        Stopping controls for the iterative methods.
    tau : float, optional
        Shrinkage threshold for the nuclear method (default is chosen
        from the data scale).
    threshold : float
        Singular-value mass level used to report rank_ for the nuclear
        method.
    seed : int, optional
        Random initialization for lrma restarts; default deterministic.

    Attributes
    ----------
    Y_ : ndarray, the completed matrix.
    rank_ : int, rank of (or imposed on) the completion.
    fit_, n_iter_, converged_ : solver diagnostics.
    """

    def __init__(self, method: str = "lrma", rank: int | None = None,
                 tol: float = 1e-10, max_iter: int = 50000,
                 tau: float | None = None, threshold: float = 0.999,
                 seed: int | None = None, max_subset_search: int = 2000):
        self.method = method
        self.rank = rank
        self.tol = tol
        self.max_iter = max_iter
        self.tau = tau
        self.threshold = threshold
        self.seed = seed
        self.max_subset_search = max_subset_search

    def fit(self, X, y=None):
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        x, obs = _observed_from_nan(X)
        cfg = SolverConfig(tol=self.tol, max_iter=self.max_iter, seed=self.seed)
        if self.method in ("lrma", "schur") and self.rank is None:
            raise ValueError(f"method {self.method!r} requires rank")
        if self.method == "lrma":
            res = lrma_fixed_rank(obs, self.rank, cfg)
            self.Y_, self.rank_ = res.Y_hat, self.rank
            self.fit_, self.n_iter_, self.converged_ = res.fit, res.iterations, res.converged
            self.result_ = res
        elif self.method == "nuclear":
            res = nuclear_norm_complete(obs, cfg, tau=self.tau)
            self.Y_ = res.Y_hat
            self.rank_ = rank_from_singular_values(res.Y_hat, self.threshold)
            self.fit_, self.n_iter_, self.converged_ = res.fit, res.iterations, res.converged
            self.result_ = res
        elif self.method == "rank1":
            self.Y_ = rank_one_complete(obs)
            self.rank_ = 1
            self.fit_ = float(np.sum(obs.residual_on_pattern(self.Y_) ** 2))
            self.n_iter_, self.converged_, self.result_ = 0, True, None
        else:
            dense, filled = schur_cascade(obs, self.rank, self.max_subset_search)
            self.Y_, self.rank_ = dense, self.rank
            self.filled_ = filled
            missing = obs.pattern.shape[0] * obs.pattern.shape[1] - obs.pattern.m
            self.converged_ = len(filled) == missing
            self.fit_, self.n_iter_, self.result_ = 0.0, 0, None
        self.n_features_in_ = x.shape[1]
        return self

    def transform(self, X):
        """Fill the NaN cells of X from the fitted completion."""
        check_is_fitted(self, "Y_")
        x = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan", copy=True)
        if x.shape != self.Y_.shape:
            raise ValueError(f"expected shape {self.Y_.shape}, got {x.shape}")
        hole = np.isnan(x)
        x[hole] = self.Y_[hole]
        return x

    def predict(self, X=None):
        """The completed matrix itself (X is ignored)."""
        check_is_fitted(self, "Y_")
        return self.Y_.copy()


class SequentialRankSelector(BaseEstimator):
    """Select a matrix rank by the sequential chi-square test.

    fit accepts either one partially observed matrix (NaN = missing) with
    a known noise scale sigma, or a stack of N replications with shape
    (N, n1, n2) sharing one observation pattern, in which case the noise
    is estimated entrywise and sigma is ignored.

    Attributes
    ----------
    rank_ : int or None, the first accepted rank.
    report_ : RankTestReport with the full (rank, statistic, p) table.
    noise_ : the NoiseModel used.
    """

    def __init__(self, alpha: float = 0.05, sigma: float = 1.0,
                 sample_size: int = 1, r_max: int | None = None,
                 tol: float = 1e-10, max_iter: int = 50000):
        self.alpha = alpha
        self.sigma = sigma
        self.sample_size = sample_size
        self.r_max = r_max
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        cfg = SolverConfig(tol=self.tol, max_iter=self.max_iter)
        if X.ndim == 3:
            first = ~np.isnan(X[0])
            if not all((~np.isnan(x) == first).all() for x in X[1:]):
                raise ValueError("replications must share one observation pattern")
            _, base = _observed_from_nan(X[0])
            pattern = base.pattern
            samples = X[:, pattern.indices[:, 0], pattern.indices[:, 1]]
            mean, noise = noise_from_replications(samples)
            obs = ObservedMatrix(pattern, mean)
        elif X.ndim == 2:
            _, obs = _observed_from_nan(X)
            noise = NoiseModel(N=self.sample_size, sigma=self.sigma)
        else:
            raise ValueError("X must be 2-D (one matrix) or 3-D (replications)")
        self.report_ = sequential_rank_test(obs, noise, alpha=self.alpha,
                                            cfg=cfg, r_max=self.r_max)
        self.rank_ = self.report_.selected_rank
        self.noise_ = noise
        self.n_features_in_ = X.shape[-1]
        return self

    def predict(self, X=None):
        check_is_fitted(self, "report_")
        return self.rank_
