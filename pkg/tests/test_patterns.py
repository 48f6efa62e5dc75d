import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lrmc.patterns import (
    ObservationPattern,
    ObservedMatrix,
    estimated_bound,
    generic_bound,
    generic_bound_dims,
    is_reducible,
    min_count_check,
    mrfa_bound,
    row_col_counts,
)


def staircase(n):
    """Lower-triangular pattern minus the bottom-left corner entry."""
    return ObservationPattern(
        n, n, [(i, j) for i in range(n) for j in range(i + 1) if (i, j) != (n - 1, 0)])


def block_pattern_40x50():
    """Two fully observed diagonal blocks: 20x20 and 20x30, m = 1000."""
    entries = [(i, j) for i in range(20) for j in range(20)]
    entries += [(i, j) for i in range(20, 40) for j in range(20, 50)]
    return ObservationPattern(40, 50, entries)


class TestObservationPattern:
    def test_dedup_and_sort(self):
        p = ObservationPattern(3, 3, [(2, 1), (0, 0), (2, 1), (1, 2)])
        assert p.m == 3
        assert p.indices.tolist() == [[0, 0], [1, 2], [2, 1]]

    def test_bounds_and_emptiness(self):
        with pytest.raises(ValueError, match="out of bounds"):
            ObservationPattern(2, 2, [(0, 2)])
        with pytest.raises(ValueError, match="at least one entry"):
            ObservationPattern(2, 2, [])
        with pytest.raises(ValueError, match="at least 2x2"):
            ObservationPattern(1, 5, [(0, 0)])

    def test_mask_round_trip(self):
        rng = np.random.default_rng(0)
        mask = rng.random((6, 4)) < 0.5
        mask[0, 0] = True
        p = ObservationPattern.from_mask(mask)
        assert (p.mask == mask).all()
        assert p.m == int(mask.sum())

    def test_complement_is_column_major(self):
        p = ObservationPattern(2, 3, [(0, 0), (1, 2)])
        comp = p.complement_indices()
        # column-major: scan columns left to right, rows top to bottom
        assert comp.tolist() == [[1, 0], [0, 1], [1, 1], [0, 2]]

    def test_contains_and_equality(self):
        p = ObservationPattern(3, 3, [(0, 0), (1, 1), (2, 2)])
        q = ObservationPattern(3, 3, [(0, 0), (2, 2)])
        assert p.contains(q)
        assert not q.contains(p)
        assert p == ObservationPattern(3, 3, [(2, 2), (1, 1), (0, 0)])
        assert p != q
        assert not p.contains(ObservationPattern(4, 3, [(0, 0)]))

    def test_full(self):
        p = ObservationPattern.full(3, 4)
        assert p.m == 12
        assert p.complement_indices().shape == (0, 2)

    def test_indices_frozen(self):
        p = ObservationPattern(2, 2, [(0, 0)])
        with pytest.raises(ValueError):
            p.indices[0, 0] = 1


class TestObservedMatrix:
    def test_from_dense_nan(self):
        a = np.array([[1.0, np.nan], [3.0, 4.0]])
        obs = ObservedMatrix.from_dense(a)
        assert obs.pattern.m == 3
        dense = obs.to_dense()
        assert np.isnan(dense[0, 1])
        assert dense[1, 0] == 3.0

    def test_value_count_mismatch(self):
        p = ObservationPattern(2, 2, [(0, 0), (1, 1)])
        with pytest.raises(ValueError, match="expected 2 values"):
            ObservedMatrix(p, [1.0])

    def test_rejects_nonfinite_values(self):
        p = ObservationPattern(2, 2, [(0, 0)])
        with pytest.raises(ValueError, match="finite"):
            ObservedMatrix(p, [np.inf])

    def test_residual_on_pattern(self):
        a = np.array([[1.0, np.nan], [np.nan, 4.0]])
        obs = ObservedMatrix.from_dense(a)
        y = np.array([[1.5, 9.0], [9.0, 4.0]])
        assert_allclose(obs.residual_on_pattern(y), [0.5, 0.0])
        with pytest.raises(ValueError, match="shape"):
            obs.residual_on_pattern(np.ones((3, 3)))


def test_row_col_counts_and_min_check():
    p = ObservationPattern(3, 3, [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)])
    rows, cols = row_col_counts(p)
    assert rows.tolist() == [2, 2, 2]
    assert cols.tolist() == [3, 3, 0]
    assert min_count_check(p, 2) is False  # column 2 is empty
    assert min_count_check(ObservationPattern.full(3, 3), 3) is True
    with pytest.raises(ValueError):
        min_count_check(p, 0)


class TestReducibility:
    def test_block_pattern_splits_in_two(self):
        rep = is_reducible(block_pattern_40x50())
        assert rep.reducible
        assert rep.n_components == 2
        assert rep.row_groups[0] == list(range(20))
        assert rep.col_groups[1] == list(range(20, 50))
        assert rep.empty_rows == [] and rep.empty_cols == []

    @pytest.mark.parametrize("n", [3, 4, 6])
    def test_staircase_is_irreducible(self, n):
        rep = is_reducible(staircase(n))
        assert not rep.reducible
        assert rep.n_components == 1

    def test_empty_rows_reported(self):
        p = ObservationPattern(3, 3, [(0, 0), (0, 1), (0, 2)])
        rep = is_reducible(p)
        assert rep.empty_rows == [1, 2]
        assert rep.empty_cols == []


class TestGenericBound:
    def test_wilson_bound_is_six_minus_sqrt_six(self):
        b = generic_bound_dims(6, 6, 30)
        assert abs(b.R_value - (6 - math.sqrt(6))) < 1e-12
        assert b.R_ceil == 4

    def test_large_square_case(self):
        b = generic_bound_dims(1000, 1000, 20000)
        assert abs(b.R_value - 10.05) < 0.005
        # any rank attaining m = 20000 generically must exceed the bound
        assert b.R_ceil == 11

    def test_full_observation_gives_min_dimension(self):
        assert generic_bound_dims(7, 11, 77).R_value == 7.0
        assert generic_bound_dims(11, 7, 77).R_value == 7.0

    def test_exact_integer_root_is_snapped(self):
        # m = r(n1+n2-r) with r = 2, n1 = n2 = 4: the root is exactly 2
        b = generic_bound_dims(4, 4, 12)
        assert b.R_value == 2.0
        assert b.R_ceil == 2

    def test_dimension_counts(self):
        b = generic_bound_dims(6, 6, 30)
        assert b.manifold_dim(3) == 27
        assert b.f_rm(3) == 27 + 36 - 30
        p = ObservationPattern.full(6, 6)
        assert generic_bound(p).R_value == 6.0

    def test_m_out_of_range(self):
        with pytest.raises(ValueError):
            generic_bound_dims(4, 4, 17)
        with pytest.raises(ValueError):
            generic_bound_dims(4, 4, 0)


def test_estimated_bound_values():
    # 20x25 at p = 0.4: 22.5 - sqrt(506.25 - 200) = 5 exactly
    assert abs(estimated_bound(20, 25, 0.4) - 5.0) < 1e-12
    assert abs(estimated_bound(20, 25, 0.6) - 8.138593383654927) < 1e-9
    assert abs(estimated_bound(8, 8, 1.0) - 8.0) < 1e-12
    with pytest.raises(ValueError):
        estimated_bound(4, 4, 0.0)


def test_mrfa_bound_values():
    assert mrfa_bound(6) == 3.0
    assert mrfa_bound(3) == 1.0
    assert mrfa_bound(1) == 0.0
    with pytest.raises(ValueError):
        mrfa_bound(0)
