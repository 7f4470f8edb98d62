import math

import numpy as np
import pytest
from scipy import stats

from fastperm import TwoSample, p_pred, p_simple_mc, partition_mc
from fastperm.errors import DataError, DomainError
from fastperm.exact import partition_pvalues
from fastperm.partitions import partition_weights
from fastperm.resampling import STATUS_BELOW, STATUS_OK
from fastperm.seeding import derive_seed, make_rng
from fastperm.statistics import exceedance_threshold, observed_statistic

SMALL = TwoSample([1, 2], [3, 4])


def test_simple_mc_examples():
    flat = TwoSample([2.0] * 5, [2.0] * 4)
    assert p_simple_mc(flat, "abs-diff", 500, seed=1).p == 1.0
    r = p_simple_mc(SMALL, "abs-diff", 100_000, seed=7)
    assert abs(r.p - 1 / 3) <= 3 * math.sqrt((1 / 3) * (2 / 3) / 1e5)


def test_simple_mc_requires_rng_or_seed():
    with pytest.raises(DomainError):
        p_simple_mc(SMALL, "abs-diff", 10)
    with pytest.raises(DomainError):
        p_simple_mc(SMALL, "abs-diff", 0, seed=1)


def test_partition_mc_examples():
    d = TwoSample([1.0, 2.0, 4.0], [3.0, 5.0, 9.0])
    for kind in ("abs-diff", "max-ratio", "studentized"):
        assert partition_mc(d, kind, 0, 200, seed=1) == 200
        assert partition_mc(d, kind, 3, 200, seed=1) == 200
    assert partition_mc(SMALL, "abs-diff", 1, 5000, seed=3) == 0
    with pytest.raises(DomainError):
        partition_mc(SMALL, "abs-diff", 3, 10, seed=1)


@pytest.mark.parametrize("kind", ["abs-diff", "max-ratio", "studentized"])
def test_partition_mc_matches_enumeration(kind):
    rng = make_rng(derive_seed(1, kind))
    d = TwoSample(rng.gamma(2, size=6) + 0.5, rng.gamma(2, size=5) + 1.0)
    exact = partition_pvalues(d, kind)
    b = 20_000
    for m in range(1, 5):
        c = partition_mc(d, kind, m, b, seed=derive_seed(2, kind, m))
        p = exact[m]
        assert abs(c / b - p) <= 4 * math.sqrt(max(p * (1 - p), 1e-4) / b)


def test_ties_count_as_exceedances():
    # Integer data with many exact ties: counts must match the enumerated proportion.
    d = TwoSample([1, 2, 3, 4], [2, 3, 4, 5])
    exact = partition_pvalues(d, "abs-diff")
    assert exact[2] > 0
    c = partition_mc(d, "abs-diff", 2, 40_000, seed=5)
    assert abs(c / 40_000 - exact[2]) < 0.01


def test_threshold_is_below_t():
    d = TwoSample([0.1, 0.2, 0.3], [0.3, 0.2, 0.1])
    t = observed_statistic(d, "abs-diff")
    assert exceedance_threshold(d, "abs-diff", t) <= t


def test_p_pred_null_center():
    rng = make_rng(21)
    x = rng.normal(size=30)
    d = TwoSample(x, rng.permutation(x))
    r = p_pred(d, "abs-diff", seed=4)
    w = partition_weights(30, 30)
    assert r.status == STATUS_OK
    assert r.m_stop == w.m_max
    assert abs(r.fit.beta1) < 0.05
    assert r.log10_p > -0.1


def test_p_pred_report_invariants():
    rng = make_rng(22)
    d = TwoSample(rng.normal(1.5, 1, 40), rng.normal(0, 1, 40))
    r = p_pred(d, "abs-diff", b_pred=500, seed=9)
    c = r.counts
    assert c.counts[0] == 500 and np.all((c.counts >= 0) & (c.counts <= 500))
    assert c.counts[c.m_stop] == 0 or c.m_stop == partition_weights(40, 40).m_max
    assert r.total_iterations == 500 * r.m_stop
    assert r.log10_p <= 0
    assert r.fit.beta1 < 0
    again = p_pred(d, "abs-diff", b_pred=500, seed=9)
    assert again.log10_p == r.log10_p and np.array_equal(again.counts.counts, c.counts)
    assert again.fit == r.fit


def test_p_pred_agrees_with_t_test_n60_mean2():
    from fastperm.oracles import p_t_test

    gaps = []
    for r in range(100):
        rng = make_rng(derive_seed(31, r))
        d = TwoSample(rng.normal(2, 1, 60), rng.normal(0, 1, 60))
        gaps.append(p_pred(d, "abs-diff", seed=derive_seed(32, r)).log10_p - p_t_test(d, log10=True))
    assert abs(np.median(gaps)) <= 0.5


def test_p_pred_below_resolution():
    d = TwoSample(np.arange(10.0) + 100, np.arange(10.0))
    r = p_pred(d, "abs-diff", b_pred=50, seed=1)
    w = partition_weights(10, 10)
    assert r.status == STATUS_BELOW and r.fit is None
    expected = math.log(2 * math.exp(w.log_f[0])) / math.log(10)
    assert r.log10_p == pytest.approx(expected)


def test_p_pred_unequal_sizes_reports_imbalance():
    rng = make_rng(23)
    d = TwoSample(rng.normal(1, 1, 20), rng.normal(0, 1, 80))
    r = p_pred(d, "abs-diff", seed=2)
    assert r.imbalance == 4.0
    assert math.isfinite(r.log10_p)


def test_p_pred_errors():
    with pytest.raises(DataError):
        p_pred(TwoSample([1.0], [2.0, 3.0]), "abs-diff", seed=1)
    with pytest.raises(DomainError):
        p_pred(SMALL, "abs-diff", b_pred=1, seed=1)


def test_extreme_p_values_stay_finite():
    rng = make_rng(24)
    d = TwoSample(rng.normal(0.6, 1, 20_000), rng.normal(0, 1, 20_000))
    r = p_pred(d, "abs-diff", b_pred=200, seed=3)
    assert math.isfinite(r.log10_p) and r.log10_p < -100


def test_simple_mc_uniform_under_null():
    rng = make_rng(25)
    ps = []
    for r in range(200):
        d = TwoSample(rng.normal(size=8), rng.normal(size=8))
        ps.append(p_simple_mc(d, "abs-diff", 400, seed=derive_seed(26, r)).p)
    assert stats.kstest(ps, "uniform").pvalue > 0.001
