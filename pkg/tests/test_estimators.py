import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lrmc.estimators import MatrixCompleter, SequentialRankSelector
from lrmc.harness import InstanceSpec, gen_instance
from lrmc.patterns import ObservedMatrix
from lrmc.solvers import lrma_fixed_rank
from lrmc.stats import NoiseModel, sequential_rank_test


def nan_view(inst):
    x = np.full(inst.y_star.shape, np.nan)
    p = inst.observed.pattern
    x[p.indices[:, 0], p.indices[:, 1]] = inst.observed.values
    return x


@pytest.fixture
def noiseless():
    spec = InstanceSpec(8, 9, 2, p=0.7, seed=17, noise=NoiseModel(sigma=0.0))
    return gen_instance(spec)


class TestMatrixCompleter:
    def test_matches_functional_core(self, noiseless):
        est = MatrixCompleter(rank=2).fit(nan_view(noiseless))
        direct = lrma_fixed_rank(noiseless.observed, 2)
        assert np.array_equal(est.Y_, direct.Y_hat)
        assert est.fit_ == direct.fit
        assert est.n_iter_ == direct.iterations
        assert est.converged_ is direct.converged
        assert est.rank_ == 2

    def test_transform_fills_only_holes(self, noiseless):
        x = nan_view(noiseless)
        est = MatrixCompleter(rank=2).fit(x)
        filled = est.transform(x)
        hole = np.isnan(x)
        assert (filled[~hole] == x[~hole]).all()
        assert not np.isnan(filled).any()
        assert np.allclose(filled[hole], noiseless.y_star[hole], atol=1e-5)

    def test_predict_returns_copy(self, noiseless):
        est = MatrixCompleter(rank=2).fit(nan_view(noiseless))
        y = est.predict()
        y[0, 0] = 1e9
        assert est.Y_[0, 0] != 1e9

    def test_nuclear_reports_threshold_rank(self, noiseless):
        est = MatrixCompleter(method="nuclear", threshold=0.999,
                              tol=1e-8).fit(nan_view(noiseless))
        assert est.converged_
        assert est.rank_ >= 2

    def test_rank1_exact(self):
        x = np.array([[np.nan, 2.0], [3.0, 6.0]])
        est = MatrixCompleter(method="rank1").fit(x)
        assert abs(est.Y_[0, 0] - 1.0) < 1e-12
        assert est.rank_ == 1

    def test_schur_tracks_filled_cells(self):
        y = np.outer([1.0, 2.0, 3.0], [1.0, 1.5, 2.0])
        x = y.copy()
        x[2, 2] = np.nan
        est = MatrixCompleter(method="schur", rank=1).fit(x)
        assert est.filled_ == {(2, 2)}
        assert est.converged_
        assert abs(est.Y_[2, 2] - y[2, 2]) < 1e-10

    def test_validation(self, noiseless):
        with pytest.raises(ValueError, match="method"):
            MatrixCompleter(method="magic").fit(nan_view(noiseless))
        with pytest.raises(ValueError, match="requires rank"):
            MatrixCompleter().fit(nan_view(noiseless))
        with pytest.raises(ValueError, match="no observed entries"):
            MatrixCompleter(rank=1).fit(np.full((3, 3), np.nan))

    def test_transform_shape_mismatch(self, noiseless):
        est = MatrixCompleter(rank=2).fit(nan_view(noiseless))
        with pytest.raises(ValueError, match="expected shape"):
            est.transform(np.zeros((3, 3)))

    def test_unfitted_raises(self):
        with pytest.raises(NotFittedError):
            MatrixCompleter(rank=1).predict()

    def test_clone_and_get_params(self):
        est = MatrixCompleter(method="nuclear", tau=50.0, threshold=0.9)
        params = est.get_params()
        assert params["tau"] == 50.0
        twin = clone(est)
        assert twin.get_params() == params


class TestSequentialRankSelector:
    @staticmethod
    def _noisy(seed=23):
        spec = InstanceSpec(10, 12, 2, m=70, seed=seed,
                            noise=NoiseModel(N=25, sigma=0.5))
        return gen_instance(spec)

    def test_two_dim_path_matches_functional_core(self):
        inst = self._noisy()
        est = SequentialRankSelector(sigma=0.5, sample_size=25).fit(nan_view(inst))
        direct = sequential_rank_test(inst.observed, NoiseModel(N=25, sigma=0.5))
        assert est.rank_ == direct.selected_rank == 2
        assert [r.T_N for r in est.report_.rows] == [r.T_N for r in direct.rows]
        assert est.predict() == 2

    def test_three_dim_path_estimates_noise(self):
        inst = self._noisy(seed=24)
        p = inst.observed.pattern
        rng = np.random.default_rng(99)
        reps = np.full((30,) + inst.y_star.shape, np.nan)
        ii, as_j = p.indices[:, 0], p.indices[:, 1]
        clean = inst.y_star[ii, as_j]
        for k in range(30):
            reps[k, ii, as_j] = clean + 0.5 * rng.standard_normal(p.m)
        est = SequentialRankSelector().fit(reps)
        assert est.noise_.N == 30
        assert np.asarray(est.noise_.sigma).shape == (p.m,)
        assert est.rank_ == 2

    def test_replications_must_share_pattern(self):
        reps = np.full((2, 3, 3), 1.0)
        reps[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="share one observation pattern"):
            SequentialRankSelector().fit(reps)

    def test_dimension_validation(self):
        with pytest.raises(ValueError, match="2-D .*or 3-D"):
            SequentialRankSelector().fit(np.ones(5))

    def test_unfitted_raises(self):
        with pytest.raises(NotFittedError):
            SequentialRankSelector().predict()
