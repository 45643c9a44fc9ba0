import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cganeb._validation import InvalidParameterError, ShapeError
from cganeb.screening import (
    CUTOFFS,
    SummaryStat,
    fi_test,
    mape_hotspots,
    n_hotspots,
    paired_t_test,
    pmd_test,
    rank_sites,
    summarize,
    t_critical,
)

from oracles import brute_fi, brute_pmd_bounds


def test_rank_examples():
    np.testing.assert_array_equal(rank_sites([1, 3, 2]), [1, 2, 0])
    np.testing.assert_array_equal(rank_sites([5, 5, 5, 5]), [0, 1, 2, 3])
    with pytest.raises(ValueError):
        rank_sites([1.0, np.nan])


def test_hotspot_count_uses_ceiling():
    assert n_hotspots(500, 0.025) == 13
    assert n_hotspots(500, 0.10) == 50
    assert n_hotspots(1000, 0.075) == 75
    assert n_hotspots(8, 0.5) == 4


def test_fi_examples():
    lam = np.array([10, 9, 8, 7, 6, 5, 4, 3], dtype=float)
    assert fi_test(lam, 3 * lam, 0.5) == 0.0
    scores = np.array([10, 9, 0, 0, 8, 7, 0, 0], dtype=float)
    assert fi_test(lam, scores, 0.5) == 0.5


def test_fi_reverse_ranking_is_one():
    lam = np.arange(1.0, 101.0)
    assert fi_test(lam, -lam, 0.10) == 1.0
    assert brute_fi(list(lam), list(-lam), 10) == 1.0


def test_pmd_hand_example():
    lam = np.array([10, 9, 8, 5, 1, 1], dtype=float)
    scores = np.array([6, 1, 5, 4, 0, 0], dtype=float)
    assert pmd_test(lam, scores, 0.5) == pytest.approx(4 / 27, abs=1e-15)
    assert pmd_test(lam, lam, 0.5) == 0.0


def test_length_mismatch():
    with pytest.raises(ShapeError):
        fi_test([1, 2, 3], [1, 2], 0.5)
    with pytest.raises(ShapeError):
        pmd_test([1, 2, 3], [1, 2], 0.5)


@pytest.mark.parametrize("cutoff", CUTOFFS)
def test_metrics_against_brute_force(cutoff):
    rng = np.random.default_rng(int(cutoff * 1000))
    for _ in range(200):
        n = int(rng.integers(2, 13))
        lam = rng.gamma(2.0, 2.0, n)
        scores = rng.integers(0, 5, n).astype(float) if rng.random() < 0.3 else lam + rng.normal(0, 2, n)
        r = n_hotspots(n, cutoff)
        assert r == math.ceil(cutoff * n - 1e-9)
        assert fi_test(lam, scores, cutoff) == brute_fi(list(lam), list(scores), r)
        pmd = pmd_test(lam, scores, cutoff)
        assert pmd == pytest.approx(brute_pmd_bounds(list(lam), list(scores), r), abs=1e-12)
        assert 0.0 <= pmd <= 1.0


@given(st.lists(st.floats(0.01, 100.0), min_size=2, max_size=60, unique=True), st.sampled_from(CUTOFFS))
@settings(max_examples=100)
def test_monotone_transform_invariance(lam, cutoff):
    lam = np.array(lam)
    for transform in (np.log, np.sqrt, lambda v: 3 * v + 1):
        # rounding can merge neighbours into a tie, which is no longer order-preserving
        if np.unique(transform(lam)).size < lam.size:
            continue
        assert fi_test(lam, transform(lam), cutoff) == 0.0
        assert pmd_test(lam, transform(lam), cutoff) == 0.0


def test_mape_examples():
    lam = np.array([4.0, 1.0, 1.0, 1.0])
    assert mape_hotspots(lam, lam, lam, 0.25) == 0.0
    assert mape_hotspots(lam, np.array([5.0, 1, 1, 1]), lam, 0.25) == 0.25
    assert mape_hotspots(lam, np.zeros(4), lam, 0.5) == 1.0


def test_mape_proposed_versus_true_sets():
    lam = np.array([10.0, 1.0, 1.0, 1.0])
    est = np.array([10.0, 3.0, 1.0, 1.0])
    scores = np.array([0.0, 5.0, 0.0, 0.0])
    assert mape_hotspots(lam, est, scores, 0.25, over="proposed") == 2.0
    assert mape_hotspots(lam, est, scores, 0.25, over="true") == 0.0


def test_t_critical_dof_24():
    assert t_critical(24) == pytest.approx(2.0639, abs=5e-5)


def test_summarize_examples():
    assert summarize(np.full(25, 0.3)) == SummaryStat(0.3, 0.3, 0.3, 25)
    s = summarize(np.arange(1, 26))
    assert s.mean == 13.0
    sd = math.sqrt(sum((k - 13) ** 2 for k in range(1, 26)) / 24)
    assert sd == pytest.approx(7.3598, abs=1e-4)
    assert s.ci_high - s.mean == pytest.approx(2.0639 * sd / 5, abs=1e-3)
    assert s.ci_high - s.mean == pytest.approx(3.038, abs=1e-3)
    assert s.ci_low <= s.mean <= s.ci_high


def test_summarize_matches_scipy_interval(rng):
    v = rng.normal(size=25)
    s = summarize(v)
    lo, hi = stats.t.interval(0.95, 24, loc=v.mean(), scale=stats.sem(v))
    assert s.ci_low == pytest.approx(lo, abs=1e-10)
    assert s.ci_high == pytest.approx(hi, abs=1e-10)


def test_summarize_needs_two_values():
    with pytest.raises(InvalidParameterError):
        summarize([1.0])


def test_paired_t_examples():
    a = np.arange(25.0)
    res = paired_t_test(a, a)
    assert not res.significant and res.t_stat == 0.0 and res.better is None
    res = paired_t_test(a + 1, a)
    assert res.significant and res.better == "b"


def test_paired_t_textbook_value():
    d = np.array([1, -1, 2, -2, 0.5])
    res = paired_t_test(d, np.zeros(5))
    hand = d.mean() / (d.std(ddof=1) / math.sqrt(5))
    assert res.t_stat == pytest.approx(hand, abs=1e-12)
    assert res.t_stat == pytest.approx(stats.ttest_rel(d, np.zeros(5)).statistic, abs=1e-10)
    assert res.dof == 4 and not res.significant


def test_paired_t_matches_scipy(rng):
    for _ in range(50):
        a = rng.normal(0.3, 0.1, 25)
        b = a + rng.normal(0.02, 0.05, 25)
        res = paired_t_test(a, b)
        ref = stats.ttest_rel(a, b)
        assert res.t_stat == pytest.approx(ref.statistic, abs=1e-10)
        assert res.significant == (ref.pvalue < 0.05)
