"""Parametric reference p-values.

These are not permutation p-values, but under the matching data model they
approximate one closely and serve as comparison baselines: the t-test for
normal data, the scaled beta prime law for ratios of exponential or gamma
means, a saddlepoint approximation for differences of gamma means, and the
delta method for ratios.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConvergenceError, DataError, DomainError
from .special import (
    log_regularized_incomplete_beta,
    log_regularized_lower_incomplete_gamma,
    log_std_normal_sf,
    logaddexp,
    digamma,
    std_normal_cdf,
    std_normal_pdf,
    trigamma,
)

LN10 = math.log(10.0)
MLE_MAX_ITER = 100
MLE_TOL = 1e-10
# Below this many standard deviations from the centre the Lugannani-Rice
# formula is replaced by its limit; in between the two regimes it is
# interpolated.
CENTRE_EXACT = 1e-8
CENTRE_BLEND = 1e-3


def _finish(log_p, log10):
    log_p = min(log_p, 0.0)
    return log_p / LN10 if log10 else math.exp(log_p)


# -- t-tests ---------------------------------------------------------------


def p_t_test(data, equal_variance=True, log10=False):
    """Two-sided two-sample t-test (pooled or Welch)."""
    n_x, n_y = data.n_x, data.n_y
    if n_x < 2 or n_y < 2:
        raise DataError("t-test needs at least two observations per group")
    vx, vy = data.var_x, data.var_y
    if equal_variance:
        df = n_x + n_y - 2.0
        sp = (data.css_x + data.css_y) / df
        se2 = sp * (1.0 / n_x + 1.0 / n_y)
    else:
        ax, ay = vx / n_x, vy / n_y
        se2 = ax + ay
        if se2 > 0:
            df = se2 ** 2 / (ax ** 2 / (n_x - 1) + ay ** 2 / (n_y - 1))
    if se2 <= 0:
        raise DataError("t-test undefined: zero variance")
    tstat = (data.mean_x - data.mean_y) / math.sqrt(se2)
    if tstat == 0.0:
        return _finish(0.0, log10)
    x = df / (df + tstat * tstat)
    return _finish(log_regularized_incomplete_beta(df / 2.0, 0.5, x), log10)


# -- beta prime ------------------------------------------------------------


def _log_scaled_beta_prime_sf(t, a, b, s):
    # P(s * B' > t) with B' ~ BetaPrime(a, b).  With u = t/s the cdf is
    # I_{u/(1+u)}(a, b), so the upper tail is I_{1/(1+u)}(b, a).
    u = t / s
    return log_regularized_incomplete_beta(b, a, 1.0 / (1.0 + u))


def p_beta_prime(n_x, n_y, alpha, t, log10=False):
    """P(max(X̄/Ȳ, Ȳ/X̄) >= t) for iid Gamma(alpha, lambda) observations."""
    if t < 1:
        raise DomainError(f"max-ratio statistic is at least 1, got t={t}")
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if n_x < 1 or n_y < 1:
        raise DataError("group sizes must be positive")
    a, b = n_x * alpha, n_y * alpha
    upper = _log_scaled_beta_prime_sf(t, a, b, n_y / n_x)
    lower = _log_scaled_beta_prime_sf(t, b, a, n_x / n_y)
    return _finish(logaddexp(upper, lower), log10)


# -- gamma MLE -------------------------------------------------------------


@dataclass(frozen=True)
class GammaMle:
    alpha_hat: float
    lambda_hat: float
    iterations: int
    converged: bool


def gamma_mle(pooled):
    """Shape and rate MLE of a gamma sample by Newton-Raphson on the shape.

    The rate is profiled out as alpha / mean.  Steps that would leave the
    positive half-line are halved.
    """
    z = np.asarray(pooled, dtype=float).ravel()
    if z.size < 2:
        raise DataError("gamma MLE needs at least two observations")
    if np.any(z <= 0) or not np.all(np.isfinite(z)):
        raise DataError("gamma MLE needs strictly positive finite data")
    n = z.size
    zbar = float(z.mean())
    s2 = float(z.var(ddof=1))
    if s2 <= 0:
        raise DataError("gamma MLE undefined for data with zero variance")
    sum_log = float(np.log(z).sum())

    def loglik(a):
        return n * a * math.log(a / zbar) - n * math.lgamma(a) + (a - 1) * sum_log - n * a

    alpha = zbar * zbar / s2
    ll = loglik(alpha)
    for it in range(1, MLE_MAX_ITER + 1):
        score = n * math.log(alpha / zbar) - n * digamma(alpha) + sum_log
        hess = n / alpha - n * trigamma(alpha)
        step = -score / hess
        while alpha + step <= 0:
            step *= 0.5
        alpha += step
        new_ll = loglik(alpha)
        if abs(new_ll - ll) < MLE_TOL:
            return GammaMle(alpha, alpha / zbar, it, True)
        ll = new_ll
    raise ConvergenceError(
        f"gamma MLE did not converge in {MLE_MAX_ITER} iterations",
        last=GammaMle(alpha, alpha / zbar, MLE_MAX_ITER, False),
    )


# -- saddlepoint for the difference of gamma means ---------------------------


class _GammaDiffCgf:
    """Cumulant generating function of X̄ - Ȳ for iid Gamma(alpha, rate lam)."""

    def __init__(self, n_x, n_y, alpha, lam):
        if alpha <= 0 or lam <= 0:
            raise DomainError("alpha and lambda must be positive")
        if n_x < 1 or n_y < 1:
            raise DataError("group sizes must be positive")
        self.n_x, self.n_y, self.alpha, self.lam = float(n_x), float(n_y), float(alpha), float(lam)
        self.k2 = alpha / lam ** 2 * (1.0 / n_x + 1.0 / n_y)
        self.k3 = 2.0 * alpha / lam ** 3 * (1.0 / n_x ** 2 - 1.0 / n_y ** 2)
        self.sd = math.sqrt(self.k2)

    def k(self, s):
        nx, ny, a, lam = self.n_x, self.n_y, self.alpha, self.lam
        return -nx * a * math.log1p(-s / (nx * lam)) - ny * a * math.log1p(s / (ny * lam))

    def k1(self, s):
        nx, ny, a, lam = self.n_x, self.n_y, self.alpha, self.lam
        return a * (nx + ny) * s / ((nx * lam - s) * (ny * lam + s))

    def k2_at(self, s):
        nx, ny, a, lam = self.n_x, self.n_y, self.alpha, self.lam
        return a * (nx + ny) * (s * s + nx * ny * lam * lam) / ((nx * lam - s) * (ny * lam + s)) ** 2

    def saddlepoint(self, z):
        """Root of K'(s) = z on (-n_y lam, n_x lam).

        Clearing denominators gives z s^2 + (alpha N - z lam (n_x - n_y)) s
        - z n_x n_y lam^2 = 0, whose roots straddle zero; the one with the
        sign of z lies in the domain.  A Newton step then polishes it.
        """
        if z == 0.0:
            return 0.0
        nx, ny, a, lam = self.n_x, self.n_y, self.alpha, self.lam
        b = a * (nx + ny) - z * lam * (nx - ny)
        c = -z * nx * ny * lam * lam
        disc = math.sqrt(b * b - 4.0 * z * c)
        q = -0.5 * (b + math.copysign(disc, b))
        roots = [q / z, c / q] if q != 0.0 else [-b / z]
        lo, hi = -ny * lam, nx * lam
        cands = [r for r in roots if lo < r < hi and r * z > 0]
        if not cands:
            raise ConvergenceError(f"no saddlepoint found for z={z}")
        s = cands[0]
        for _ in range(3):
            d2 = self.k2_at(s)
            nxt = s - (self.k1(s) - z) / d2
            if not lo < nxt < hi:
                break
            s = nxt
        return s

    def _wu(self, z):
        s = self.saddlepoint(z)
        w2 = max(2.0 * (s * z - self.k(s)), 0.0)
        w = math.copysign(math.sqrt(w2), s)
        u = s * math.sqrt(self.k2_at(s))
        return w, u

    def centre_cdf(self):
        return 0.5 + self.k3 / (6.0 * math.sqrt(2.0 * math.pi) * self.k2 ** 1.5)

    def _raw(self, z, upper):
        w, u = self._wu(z)
        corr = std_normal_pdf(w) * (1.0 / w - 1.0 / u)
        if upper:
            return math.exp(log_std_normal_sf(w)) - corr
        return std_normal_cdf(w) + corr

    def tail(self, z, upper):
        """Lugannani-Rice cdf (or survival function when ``upper``)."""
        r = abs(z) / self.sd
        mid = self.centre_cdf()
        mid = 1.0 - mid if upper else mid
        if r <= CENTRE_EXACT:
            return mid
        if r < CENTRE_BLEND:
            edge = math.copysign(CENTRE_BLEND * self.sd, z)
            frac = r / CENTRE_BLEND
            return (1.0 - frac) * mid + frac * self._raw(edge, upper)
        return self._raw(z, upper)


def saddlepoint_cdf(n_x, n_y, alpha, lam, z):
    """Saddlepoint approximation to P(X̄ - Ȳ <= z)."""
    return _GammaDiffCgf(n_x, n_y, alpha, lam).tail(float(z), upper=False)


def saddlepoint_root(n_x, n_y, alpha, lam, z):
    return _GammaDiffCgf(n_x, n_y, alpha, lam).saddlepoint(float(z))


def p_saddlepoint_gamma_diff(n_x, n_y, alpha, lam, t):
    """Two-sided P(|X̄ - Ȳ| >= t) by the Lugannani-Rice formula."""
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    cgf = _GammaDiffCgf(n_x, n_y, alpha, lam)
    if t <= CENTRE_EXACT * cgf.sd:
        return 1.0
    p = cgf.tail(t, upper=True) + cgf.tail(-t, upper=False)
    return min(max(p, 0.0), 1.0)


def exact_gamma_diff_cdf(n_x, n_y, alpha, lam, z):
    """P(X̄ - Ȳ <= z) by quadrature over the distribution of Ȳ.

    X̄ ~ Gamma(n_x alpha, rate n_x lam) and Ȳ ~ Gamma(n_y alpha, rate n_y lam),
    so G(z) = E[P(n_x alpha, n_x lam (Ȳ + z))].  The integrand is assembled in
    log space.  Intended as a reference for tests; the relative accuracy of
    values below about 1e-12 is limited by the quadrature.
    """
    from scipy.integrate import quad

    if alpha <= 0 or lam <= 0:
        raise DomainError("alpha and lambda must be positive")
    z = float(z)
    if z == math.inf:
        return 1.0
    if z == -math.inf:
        return 0.0
    ay, ry = n_y * alpha, n_y * lam
    ax, rx = n_x * alpha, n_x * lam
    log_c = ay * math.log(ry) - math.lgamma(ay)

    def integrand(v):
        if v <= 0.0 or v + z <= 0.0:
            return 0.0
        lp = log_regularized_lower_incomplete_gamma(ax, rx * (v + z))
        return math.exp(log_c + (ay - 1.0) * math.log(v) - ry * v + lp)

    mean, sd = ay / ry, math.sqrt(ay) / ry
    lo = max(0.0, -z)
    hi = max(mean + 60.0 * sd, lo + 60.0 * sd)
    pts = sorted({p for p in (mean - 5 * sd, mean, mean + 5 * sd) if lo < p < hi})
    val, err = quad(integrand, lo, hi, points=pts or None, limit=400, epsabs=1e-14, epsrel=1e-10)
    if not math.isfinite(val) or err > 1e-6:
        raise ConvergenceError(f"quadrature failed for z={z} (error estimate {err})")
    return min(max(val, 0.0), 1.0)


# -- delta method for the ratio of means -----------------------------------


def p_delta_ratio(data, log10=False):
    """Two-sided normal-approximation p-value for x̄/ȳ = 1."""
    if data.n_x < 2 or data.n_y < 2:
        raise DataError("delta method needs at least two observations per group")
    mx, my = data.mean_x, data.mean_y
    if mx <= 0 or my <= 0:
        raise DataError("delta method needs positive group means")
    tau1, tau2 = (math.sqrt(v) for v in delta_taus(data))
    if tau1 == 0 or tau2 == 0:
        raise DataError("delta method undefined: zero variance")
    r = mx / my
    if r >= 1:
        log_p = logaddexp(log_std_normal_sf((r - 1) / tau1), log_std_normal_sf((1 - 1 / r) / tau2))
    else:
        log_p = logaddexp(log_std_normal_sf((1 / r - 1) / tau2), log_std_normal_sf((1 - r) / tau1))
    return _finish(log_p, log10)


def delta_taus(data):
    """(tau1^2, tau2^2) of the delta method, exposed for checking."""
    mx, my = data.mean_x, data.mean_y
    sx2, sy2 = data.var_x, data.var_y
    return (
        sx2 / (data.n_x * my ** 2) + sy2 * mx ** 2 / (data.n_y * my ** 4),
        sy2 / (data.n_y * mx ** 2) + sx2 * my ** 2 / (data.n_x * mx ** 4),
    )
