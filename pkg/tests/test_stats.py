import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from topospec.errors import DegenerateInputWarning, TieError, ValidationError
from topospec.stats import average_ranks, kruskal_wallis, spearman_rank


def test_kruskal_hand_value():
    # ranks 1..6: H = 12/(6*7) * (6**2/3 + 15**2/3) - 3*7
    assert kruskal_wallis([[1, 2, 3], [4, 5, 6]]) == pytest.approx(27 / 7, abs=1e-12)
    assert abs(kruskal_wallis([[1, 2, 3], [4, 5, 6]]) - 3.857) < 1e-3


def test_kruskal_identical_groups():
    assert kruskal_wallis([[1, 2, 3], [1, 2, 3]]) == 0


def test_kruskal_degenerate_flagged():
    with pytest.warns(DegenerateInputWarning):
        assert kruskal_wallis([[2, 2], [2, 2, 2]]) == 0


def test_kruskal_rejects_empty():
    with pytest.raises(ValidationError):
        kruskal_wallis([[1, 2], []])
    with pytest.raises(ValidationError):
        kruskal_wallis([[1, 2]])


groups = st.lists(
    st.lists(st.integers(0, 6).map(float), min_size=1, max_size=12), min_size=2, max_size=4
)


@settings(max_examples=200, deadline=None)
@given(groups, st.randoms())
def test_kruskal_matches_scipy_and_is_permutation_invariant(gs, rnd):
    pooled = [x for g in gs for x in g]
    if len(set(pooled)) == 1:
        return
    h = kruskal_wallis(gs)
    assert h == pytest.approx(sps.kruskal(*gs).statistic, rel=1e-9, abs=1e-12)
    shuffled = [rnd.sample(g, len(g)) for g in gs]
    assert kruskal_wallis(shuffled) == pytest.approx(h, rel=1e-12, abs=1e-12)


def test_spearman_basic():
    assert spearman_rank([1, 2, 3], [10, 20, 30]) == 1.0
    assert spearman_rank([1, 2, 3], [30, 20, 10]) == -1.0
    with pytest.raises(TieError):
        spearman_rank([1, 10, 10], [3, 2, 1])


def test_spearman_reference_rows_with_ordinal_ties():
    # columns ordered chain, mesh, star
    assert spearman_rank([1, 10, 10], [2094.34, 1241.00, 1184.24], ties="ordinal") == -1.0
    assert spearman_rank([0.0, 9.23, 9.00], [-0.27, 1.66, 3.44]) == 0.5
    assert spearman_rank([9.95, 13.00, 28.61], [237.82, 247.42, 443.64]) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=10, unique=True),
       st.randoms())
def test_spearman_matches_scipy(a, rnd):
    b = rnd.sample(a, len(a))
    ref = sps.spearmanr(a, b).statistic
    assert spearman_rank(a, b) == pytest.approx(ref, abs=1e-12)


def test_average_ranks():
    np.testing.assert_array_equal(average_ranks([3, 1, 3, 2]), [3.5, 1, 3.5, 2])
