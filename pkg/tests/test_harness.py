import numpy as np
import pytest

from lrmc.fileio import canonical_json
from lrmc.harness import (
    ExperimentResult,
    InstanceSpec,
    derive_seed,
    gen_instance,
    mse_compare,
    qq_data,
    rank_selection_compare,
    resample_until_wellposed,
    wellposed_probability,
    wilson_fixture,
)
from lrmc.linalg import numerical_rank, singular_values
from lrmc.stats import NoiseModel, degrees_of_freedom


class TestDeriveSeed:
    def test_flattens_nested_parts(self):
        assert derive_seed(3) == (3,)
        assert derive_seed(3, 4) == (3, 4)
        assert derive_seed((3, 4), 5) == (3, 4, 5)
        assert derive_seed([1, (2, [3])], 4) == (1, 2, 3, 4)

    def test_accepts_numpy_integers(self):
        assert derive_seed(np.int64(7), np.int32(8)) == (7, 8)


class TestInstanceSpec:
    def test_requires_exactly_one_sampling_mode(self):
        with pytest.raises(ValueError, match="exactly one"):
            InstanceSpec(4, 4, 1)
        with pytest.raises(ValueError, match="exactly one"):
            InstanceSpec(4, 4, 1, p=0.5, m=8)

    def test_field_validation(self):
        with pytest.raises(ValueError):
            InstanceSpec(4, 4, 0, p=0.5)
        with pytest.raises(ValueError):
            InstanceSpec(4, 4, 5, p=0.5)
        with pytest.raises(ValueError):
            InstanceSpec(4, 4, 1, p=1.5)
        with pytest.raises(ValueError):
            InstanceSpec(4, 4, 1, m=17)
        with pytest.raises(ValueError):
            InstanceSpec(4, 4, 1, p=0.5, d_range=(2.0, 1.0))


class TestGenInstance:
    def test_deterministic_and_seed_sensitive(self):
        spec = InstanceSpec(6, 7, 2, p=0.6, seed=11)
        a = gen_instance(spec)
        b = gen_instance(spec)
        assert (a.y_star == b.y_star).all()
        assert (a.observed.values == b.observed.values).all()
        assert (a.observed.pattern.indices == b.observed.pattern.indices).all()
        c = gen_instance(InstanceSpec(6, 7, 2, p=0.6, seed=12))
        assert not (c.y_star == a.y_star).all()

    def test_truth_rank_and_scale(self):
        spec = InstanceSpec(10, 12, 3, p=0.5, seed=1)
        inst = gen_instance(spec)
        assert numerical_rank(inst.y_star) == 3
        s = singular_values(inst.y_star)[:3]
        assert s.min() > 12.0 - 1e-9
        assert s.max() < 24.0 + 1e-9

    def test_sigma_zero_is_exact(self):
        spec = InstanceSpec(6, 6, 2, p=0.7, seed=2, noise=NoiseModel(sigma=0.0))
        inst = gen_instance(spec)
        ii, jj = inst.observed.pattern.indices[:, 0], inst.observed.pattern.indices[:, 1]
        assert (inst.observed.values == inst.y_star[ii, jj]).all()

    def test_bernoulli_cardinality_near_expectation(self):
        spec = InstanceSpec(30, 30, 2, p=0.5, seed=3)
        m = gen_instance(spec).observed.pattern.m
        se = np.sqrt(900 * 0.5 * 0.5)
        assert abs(m - 450) < 3 * se

    def test_fixed_m_is_exact(self):
        spec = InstanceSpec(9, 9, 2, m=37, seed=4)
        assert gen_instance(spec).observed.pattern.m == 37

    def test_empty_rows_reported_not_rejected(self):
        inst = gen_instance(InstanceSpec(8, 8, 1, m=1, seed=5))
        assert len(inst.empty_rows) == 7
        assert len(inst.empty_cols) == 7

    def test_two_dim_drift(self):
        drift = np.full((5, 5), 2.0)
        noise = NoiseModel(N=4, sigma=0.0, drift=drift)
        spec = InstanceSpec(5, 5, 1, p=1.0, seed=6, noise=noise)
        inst = gen_instance(spec)
        clean = gen_instance(InstanceSpec(5, 5, 1, p=1.0, seed=6,
                                          noise=NoiseModel(sigma=0.0)))
        assert np.allclose(inst.observed.values - clean.observed.values, 1.0)

    def test_flat_drift_matches_pattern(self):
        spec0 = InstanceSpec(5, 5, 1, p=0.8, seed=7, noise=NoiseModel(sigma=0.0))
        m_count = gen_instance(spec0).observed.pattern.m
        noise = NoiseModel(N=1, sigma=0.0, drift=np.arange(m_count, dtype=float))
        inst = gen_instance(InstanceSpec(5, 5, 1, p=0.8, seed=7, noise=noise))
        clean = gen_instance(spec0)
        assert np.allclose(inst.observed.values - clean.observed.values,
                           np.arange(m_count))

    def test_sigma_length_mismatch(self):
        noise = NoiseModel(sigma=np.ones(3))
        with pytest.raises(ValueError, match="per observed entry"):
            gen_instance(InstanceSpec(5, 5, 1, p=1.0, seed=8, noise=noise))

    def test_vanishing_p_fails_loudly(self):
        with pytest.raises(ValueError, match="empty pattern"):
            gen_instance(InstanceSpec(3, 3, 1, p=1e-12, seed=9))


class TestResampleUntilWellposed:
    def test_returns_wellposed_instance(self):
        spec = InstanceSpec(8, 9, 2, p=0.6, seed=0)
        inst = resample_until_wellposed(spec, 2)
        from lrmc.geometry import wellposedness_check
        assert wellposedness_check(inst.y_star, 2, inst.observed.pattern).well_posed

    def test_gives_up_after_max_draws(self):
        # m = 6 leaves 10 unobserved entries against a 9-dimensional
        # certificate space, so no draw can ever be well-posed at r = 1
        spec = InstanceSpec(4, 4, 1, m=6, seed=0)
        with pytest.raises(RuntimeError, match="no well-posed pattern"):
            resample_until_wellposed(spec, 1, max_draws=5)


class TestQqData:
    def test_shapes_and_monotone_columns(self):
        spec = InstanceSpec(8, 9, 2, m=40, seed=13, noise=NoiseModel(N=5, sigma=0.5))
        res = qq_data(spec, 2, reps=25)
        assert res.values.shape == (25, 2)
        assert (np.diff(res.values[:, 0]) >= 0).all()
        assert (np.diff(res.values[:, 1]) > 0).all()
        assert res.extras["df"] == degrees_of_freedom(2, 8, 9, 40)
        assert res.name == "qq_data"

    def test_nested_mode_uses_extra_entry_count(self):
        spec = InstanceSpec(8, 9, 2, m=40, seed=13, noise=NoiseModel(N=5, sigma=0.5))
        res = qq_data(spec, 2, reps=10, nested_extra=3)
        assert res.extras["df"] == 3
        assert res.name == "qq_nested"
        assert (res.values[:, 0] > -1e-8).all()

    def test_nested_mode_needs_room(self):
        spec = InstanceSpec(4, 4, 1, p=1.0, seed=14, noise=NoiseModel(sigma=0.5))
        with pytest.raises(ValueError, match="not enough unobserved"):
            qq_data(spec, 1, reps=5, nested_extra=2)


class TestExperimentResult:
    @staticmethod
    def _tiny():
        return ExperimentResult(
            name="demo",
            grid={"r": [1, 2], "p": [0.4, 0.5, 0.6]},
            values=np.arange(6.0).reshape(2, 3),
            replications=7,
            seeds={"seed": 0},
            extras={"curve": np.array([1.0, 2.0, 3.0])},
        )

    def test_axis_validation(self):
        with pytest.raises(ValueError, match="dimensions"):
            ExperimentResult("x", {"r": [1, 2]}, np.zeros((2, 2)), 1, {})
        with pytest.raises(ValueError, match="ticks"):
            ExperimentResult("x", {"r": [1, 2, 3]}, np.zeros(2), 1, {})

    def test_csv_rows(self):
        rows = list(self._tiny().csv_rows())
        assert rows[0] == ["r", "p", "value", "replications"]
        assert len(rows) == 7
        assert rows[1] == [1, 0.4, 0.0, 7]
        assert rows[-1] == [2, 0.6, 5.0, 7]

    def test_to_dict_is_json_ready(self):
        text = canonical_json(self._tiny().to_dict())
        assert '"name": "demo"' in text
        assert text.endswith("\n")


class TestWellposedProbability:
    def test_full_observation_is_certain(self):
        res = wellposed_probability(5, 5, [1, 2], [1.0], reps=3, seed=0)
        assert res.values.shape == (2, 1)
        assert (res.values == 1.0).all()
        assert res.extras["estimated_bound"].shape == (1,)

    def test_impossible_rank_is_never_certified(self):
        res = wellposed_probability(6, 6, [5], [0.4], reps=4, seed=1)
        assert (res.values == 0.0).all()


def test_mse_compare_smoke():
    res = mse_compare(6, 6, [1], [0.8], NoiseModel(N=1, sigma=0.1), reps=2, seed=0)
    assert res.values.shape == (1, 1)
    assert res.extras["mse_lrma"].shape == (1, 1)
    assert res.extras["mse_nuclear"][0, 0] >= 0.0
    assert np.isfinite(res.values).all()


def test_rank_selection_compare_smoke():
    res = rank_selection_compare(8, 9, [1, 2], 0.8, NoiseModel(N=25, sigma=0.5),
                                 reps=2, seed=0)
    assert res.values.shape == (2, 4)
    assert res.grid["method"][0] == "sequential"
    assert (res.values >= 0).all()
    # high signal-to-noise ratio: the sequential test finds both true ranks
    assert (res.values[:, 0] == 0).all()


class TestWilsonFixture:
    def test_pattern_is_offdiagonal(self):
        obs, _ = wilson_fixture()
        assert obs.pattern.shape == (6, 6)
        assert obs.pattern.m == 30
        assert not any(i == j for i, j in obs.pattern.indices)

    def test_completions_are_rank_three(self):
        _, (first, second) = wilson_fixture()
        for y in (first, second):
            s = singular_values(y)
            assert s[3] / s[0] < 1e-6

    def test_completions_reproduce_observations(self):
        obs, (first, second) = wilson_fixture()
        ii, jj = obs.pattern.indices[:, 0], obs.pattern.indices[:, 1]
        assert (first[ii, jj] == obs.values).all()
        assert (second[ii, jj] == obs.values).all()
        assert (first == first.T).all()
        assert (second == second.T).all()

    def test_completions_differ(self):
        _, (first, second) = wilson_fixture()
        assert np.abs(np.diag(first) - np.diag(second)).max() > 0.01
