import math

import numpy as np
import pytest
from scipy import integrate, stats

from fastperm import TwoSample
from fastperm.errors import DataError, DomainError
from fastperm.oracles import (
    delta_taus,
    exact_gamma_diff_cdf,
    gamma_mle,
    p_beta_prime,
    p_delta_ratio,
    p_saddlepoint_gamma_diff,
    p_t_test,
    saddlepoint_cdf,
)
from fastperm.seeding import make_rng


def test_t_test_examples_and_scipy():
    assert p_t_test(TwoSample([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])) == 1.0
    rng = make_rng(1)
    x, y = rng.normal(size=10), rng.normal(size=10)
    # Rescale y's shift so the pooled t statistic is exactly 2.1009.
    d0 = TwoSample(x, y)
    sp = math.sqrt((d0.css_x + d0.css_y) / 18 * (2 / 10))
    d = TwoSample(x, y - y.mean() + x.mean() - 2.1009 * sp)
    assert p_t_test(d) == pytest.approx(0.0500, abs=1e-4)
    for eq in (True, False):
        ref = stats.ttest_ind(x, y + 0.7, equal_var=eq).pvalue
        assert p_t_test(TwoSample(x, y + 0.7), equal_variance=eq) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(DataError):
        p_t_test(TwoSample([1.0, 1.0], [2.0, 2.0]))


def test_t_test_log_tail():
    d = TwoSample(np.linspace(10, 11, 50), np.linspace(0, 1, 50))
    assert p_t_test(d, log10=True) < -100


def _beta_prime_reference(n_x, n_y, alpha, t):
    # Two tails of the F distribution of the ratio of gamma means.
    f = stats.f(2 * n_x * alpha, 2 * n_y * alpha)
    return f.sf(t) + f.cdf(1 / t)


def test_beta_prime():
    for n_x in (5, 20):
        assert p_beta_prime(n_x, n_x, 1.0, 1.0) == pytest.approx(1.0)
    for args in ((3, 4, 1.0, 2.0), (10, 30, 2.5, 1.7), (500, 500, 1.0, 2.25)):
        ref = _beta_prime_reference(*args)
        assert p_beta_prime(*args) == pytest.approx(ref, rel=1e-9)
    with pytest.raises(DomainError):
        p_beta_prime(3, 3, 1.0, 0.5)


def test_beta_prime_simulation():
    rng = make_rng(5)
    u1 = rng.gamma(3, size=10 ** 7) / 3
    u2 = rng.gamma(4, size=10 ** 7) / 4
    r = u1 / u2
    emp = np.mean(np.maximum(r, 1 / r) >= 2)
    p = p_beta_prime(3, 4, 1.0, 2.0)
    assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / 1e7)


def test_beta_prime_vs_quadrature():
    a, b = 6.0, 9.0

    def dens(z):
        return math.exp((a - 1) * math.log(z) - (a + b) * math.log1p(z) - math.lgamma(a) - math.lgamma(b) + math.lgamma(a + b))

    # Sums of 6 and 9 unit exponentials; the ratio of means is (b/a) times the beta prime variate.
    t = 1.8
    upper = integrate.quad(dens, t * a / b, np.inf, epsabs=1e-14)[0]
    lower = integrate.quad(dens, 0, a / (b * t), epsabs=1e-14)[0]
    assert p_beta_prime(6, 9, 1.0, t) == pytest.approx(upper + lower, rel=1e-8)


def test_gamma_mle():
    rng = make_rng(8)
    z = rng.gamma(3.0, 1 / 2.0, size=10 ** 5)
    fit = gamma_mle(z)
    assert fit.converged and abs(fit.alpha_hat - 3) < 0.05
    assert fit.lambda_hat == pytest.approx(fit.alpha_hat / z.mean())
    a, _, scale = stats.gamma.fit(z[:2000], floc=0)
    small = gamma_mle(z[:2000])
    assert small.alpha_hat == pytest.approx(a, rel=1e-4)
    with pytest.raises(DataError):
        gamma_mle([1.0, -2.0])
    with pytest.raises(DataError):
        gamma_mle([2.0, 2.0, 2.0])


def test_saddlepoint_center_and_symmetry():
    n, alpha, lam = 30, 1.0, 2.0
    assert saddlepoint_cdf(n, n, alpha, lam, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert saddlepoint_cdf(n, n, alpha, lam, 1e-12) == pytest.approx(0.5, abs=1e-9)
    for z in (0.05, 0.3, 1.0):
        total = saddlepoint_cdf(n, n, alpha, lam, z) + saddlepoint_cdf(n, n, alpha, lam, -z)
        assert total == pytest.approx(1.0, abs=1e-12)
    zs = np.linspace(-2, 2, 41)
    vals = [saddlepoint_cdf(n, n, alpha, lam, z) for z in zs]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_saddlepoint_unequal_vs_exact():
    for z in (-0.3, -0.1, 0.05, 0.2, 0.4):
        assert saddlepoint_cdf(12, 30, 2.0, 3.0, z) == pytest.approx(exact_gamma_diff_cdf(12, 30, 2.0, 3.0, z), abs=1e-3)


def test_exact_cdf_limits_and_simulation():
    assert exact_gamma_diff_cdf(20, 20, 1.0, 1.0, 0.0) == pytest.approx(0.5, abs=1e-10)
    assert exact_gamma_diff_cdf(20, 20, 1.0, 1.0, 50.0) == pytest.approx(1.0, abs=1e-12)
    assert exact_gamma_diff_cdf(20, 20, 1.0, 1.0, -50.0) == pytest.approx(0.0, abs=1e-12)
    rng = make_rng(12)
    diff = rng.gamma(20, 1 / 20, 10 ** 6) - rng.gamma(20, 1 / 20, 10 ** 6)
    grid = np.linspace(-1, 1, 21)
    emp = np.searchsorted(np.sort(diff), grid) / diff.size
    exact = np.array([exact_gamma_diff_cdf(20, 20, 1.0, 1.0, z) for z in grid])
    assert np.max(np.abs(emp - exact)) < 0.002


def test_saddlepoint_p_value_two_sided():
    p = p_saddlepoint_gamma_diff(40, 40, 1.0, 1.0, 0.4)
    ref = 2 * (1 - exact_gamma_diff_cdf(40, 40, 1.0, 1.0, 0.4))
    assert p == pytest.approx(ref, rel=1e-3)


def test_delta_method():
    d = TwoSample([1.0, 2.0, 3.0], [3.0, 1.0, 2.0])
    assert p_delta_ratio(d) == pytest.approx(1.0)
    # x: n=100, mean 2, variance 1; y: n=100, mean 1, variance 1.
    base = np.tile([-1.0, 1.0], 50) * math.sqrt(99 / 100)
    d = TwoSample(2 + base, 1 + base)
    t1, t2 = delta_taus(d)
    assert t1 == pytest.approx(0.05, rel=1e-12)
    assert t2 == pytest.approx(0.003125, rel=1e-12)
    with pytest.raises(DataError):
        p_delta_ratio(TwoSample([-1.0, -2.0], [1.0, 2.0]))


def test_delta_overestimates_small_p_values():
    from fastperm import p_pred
    from fastperm.seeding import derive_seed

    signs = []
    for r in range(100):
        rng = make_rng(derive_seed(40, r))
        d = TwoSample(rng.exponential(1.0, 100), rng.exponential(1 / 2.25, 100))
        alg1 = p_pred(d, "max-ratio", seed=derive_seed(41, r)).log10_p
        signs.append(p_delta_ratio(d, log10=True) - alg1)
    assert np.median(signs) > 0
