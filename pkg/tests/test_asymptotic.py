import math

import numpy as np
import pytest

from fastperm import SummaryPair, TwoSample, m_stop_asym, n_hat, p_asym, partition_pvalue_asym, xi, xi_conj
from fastperm.asymptotic import reflect
from fastperm.errors import ConvergenceError, DomainError, UnsupportedError
from fastperm.exact import decomposed_pvalue, partition_pvalues, permutation_pvalue
from fastperm.partitions import partition_weights
from fastperm.seeding import make_rng
from fastperm.statistics import g_family, partition_moments

DIFF = SummaryPair(15, 15, 2.25, 0.0, 1.0, 1.0)
RATIO = SummaryPair(13, 13, 5.0, 2.0, 5.0, 2.0)


def test_xi_zero_at_center():
    m = 4
    mu = partition_moments(DIFF, m).mu
    t = g_family(DIFF, "abs-diff", mu).g
    assert xi(DIFF, "abs-diff", m, t) == pytest.approx(0.0, abs=1e-12)


def test_xi_conj_is_swapped_xi():
    s = SummaryPair(9, 14, 3.0, 1.5, 2.0, 0.7)
    swapped = SummaryPair(14, 9, 1.5, 3.0, 0.7, 2.0)
    for kind, t in (("abs-diff", 1.5), ("max-ratio", 2.0)):
        assert xi_conj(s, kind, 3, t) == pytest.approx(xi(swapped, kind, 3, t), rel=1e-12)


def test_xi_errors():
    with pytest.raises(DomainError):
        xi(DIFF, "abs-diff", 15, 1.0)
    with pytest.raises(UnsupportedError):
        xi(DIFF, "studentized", 1, 1.0)


def test_partition_endpoints():
    assert partition_pvalue_asym(DIFF, "abs-diff", 0) == 1.0
    assert partition_pvalue_asym(DIFF, "abs-diff", 15) == 1.0
    assert 0 < partition_pvalue_asym(DIFF, "abs-diff", 3) < 1


def test_p_asym_examples():
    assert p_asym(DIFF, "abs-diff", reflection="published").p == pytest.approx(3.7e-6, rel=0.12)
    assert p_asym(RATIO, "max-ratio", reflection="published").p == pytest.approx(2.4e-5, rel=0.12)


def test_p_asym_palindromic_and_clamped():
    rep = p_asym(DIFF, "abs-diff", diagnostics=True)
    h = rep.per_partition_log_h
    assert h.size == 16 and np.array_equal(h, h[::-1])
    assert rep.log10_p <= 0
    same = TwoSample([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
    assert p_asym(same, "abs-diff").log10_p == 0.0


def test_p_asym_monotone_in_t():
    ts = np.linspace(0.1, 3.0, 30)
    vals = [p_asym(DIFF, "abs-diff", t=t).log10_p for t in ts]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    ts = np.linspace(1.05, 4.0, 30)
    vals = [p_asym(RATIO, "max-ratio", t=t).log10_p for t in ts]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_p_asym_tracks_exact_for_small_samples():
    rng = make_rng(3)
    d = TwoSample(rng.normal(2.0, 1, 7), rng.normal(0, 1, 7))
    exact = decomposed_pvalue(d, "abs-diff")
    assert abs(p_asym(d, "abs-diff").log10_p - math.log10(exact)) < 0.5


def test_decomposition_identity_small():
    d = TwoSample([1, 2], [3, 4])
    assert np.array_equal(partition_pvalues(d, "abs-diff"), [1, 0, 1])
    assert decomposed_pvalue(d, "abs-diff") == pytest.approx(1 / 3, abs=1e-15)
    assert permutation_pvalue(d, "abs-diff") == pytest.approx(1 / 3, abs=1e-15)


def test_reflection():
    w = partition_weights(10, 10)
    assert [reflect(w, m) for m in range(11)] == [0, 1, 2, 3, 4, 5, 4, 3, 2, 1, 0]
    assert reflect(w, 8, "published") == 4
    u = partition_weights(6, 20)
    assert reflect(u, u.m_max + 1) == u.m_max - 1
    with pytest.raises(DomainError):
        reflect(w, 3, "sideways")


def test_m_stop_examples():
    assert m_stop_asym(DIFF, "abs-diff") >= 4
    w = partition_weights(15, 15)
    assert m_stop_asym(DIFF, "abs-diff", t=0.0) == w.m_max


@pytest.mark.parametrize("kind, params, expected", [
    ("abs-diff", SummaryPair(2, 2, 2.25, 0.0, 1.0, 1.0), 15),
    ("abs-diff", SummaryPair(2, 2, 1.5, 0.0, 1.0, 1.0), 5),
    ("max-ratio", SummaryPair(2, 2, 5.25, 2.0, 5.25, 2.0), 16),
    ("max-ratio", SummaryPair(2, 2, 6.0, 2.0, 6.0, 2.0), 31),
])
def test_n_hat_examples(kind, params, expected):
    assert n_hat(params, kind) == expected


def test_n_hat_small_effect_uses_fallback():
    # The threshold is never crossed, so m_stop falls back to m_max = n // 2.
    assert n_hat(SummaryPair(2, 2, 0.1, 0.0, 1.0, 1.0), "abs-diff") == 8


def test_n_hat_cap():
    with pytest.raises(ConvergenceError):
        n_hat(SummaryPair(2, 2, 2.25, 0.0, 1.0, 1.0), "abs-diff", c=40, cap=50)
