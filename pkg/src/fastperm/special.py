"""Scalar special functions used throughout the package.

Everything here works on plain Python floats.  Log-domain variants exist for
the tail probabilities because the p-values this package targets routinely
sit far below the smallest positive double.
"""

import math
from statistics import NormalDist

from .errors import ConvergenceError, DomainError

MAX_ITER = 300
EPS = 1e-14
TINY = 1e-300

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT2 = math.sqrt(2.0)

_STD_NORMAL = NormalDist()


def _check_finite(name, x):
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")


def log_gamma(x):
    """Natural log of the gamma function for x > 0."""
    x = float(x)
    _check_finite("x", x)
    if x <= 0.0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def log1mexp(a):
    """log(1 - exp(a)) for a <= 0, accurate at both ends."""
    if a > 0.0:
        raise DomainError(f"log1mexp requires a <= 0, got {a!r}")
    if a == 0.0:
        return -math.inf
    if a > -math.log(2.0):
        return math.log(-math.expm1(a))
    return math.log1p(-math.exp(a))


def logaddexp(a, b):
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


# -- normal distribution ---------------------------------------------------


def std_normal_pdf(z):
    return math.exp(-0.5 * z * z - LOG_SQRT_2PI)


def std_normal_cdf(z):
    """Phi(z), saturating to 0 or 1 in linear space."""
    z = float(z)
    if math.isnan(z):
        raise DomainError("std_normal_cdf of NaN")
    return 0.5 * math.erfc(-z / SQRT2)


def _log_mills_ratio(z):
    # Continued fraction R(z) = 1/(z+ 1/(z+ 2/(z+ 3/(z+ ...)))), modified Lentz.
    f = z
    c = z
    d = 0.0
    for k in range(1, MAX_ITER + 1):
        d = z + k * d
        if d == 0.0:
            d = TINY
        c = z + k / c
        if c == 0.0:
            c = TINY
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < EPS:
            return -math.log(f)
    raise ConvergenceError(f"Mills ratio continued fraction did not converge at z={z}")


def log_std_normal_sf(z):
    """log(1 - Phi(z)), finite for all finite z."""
    z = float(z)
    if math.isnan(z):
        raise DomainError("log_std_normal_sf of NaN")
    if z == math.inf:
        return -math.inf
    if z == -math.inf:
        return 0.0
    if z < 0.0:
        return math.log1p(-0.5 * math.erfc(-z / SQRT2))
    if z < 5.0:
        return math.log(0.5 * math.erfc(z / SQRT2))
    return -0.5 * z * z - LOG_SQRT_2PI + _log_mills_ratio(z)


def log_std_normal_cdf(z):
    """log(Phi(z))."""
    return log_std_normal_sf(-z)


def std_normal_quantile(p):
    """Inverse of Phi on (0, 1)."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"std_normal_quantile requires 0 < p < 1, got {p!r}")
    z = _STD_NORMAL.inv_cdf(p)
    # One Halley step against our own cdf keeps the pair self-consistent.
    err = std_normal_cdf(z) - p
    dens = std_normal_pdf(z)
    if dens > 0.0 and err != 0.0:
        u = err / dens
        z -= u / (1.0 + 0.5 * z * u)
    return z


# -- incomplete beta -------------------------------------------------------


def _betacf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h
    raise ConvergenceError(
        f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})",
        last=h,
    )


def _check_beta_args(a, b, x):
    for name, v in (("a", a), ("b", b), ("x", x)):
        _check_finite(name, v)
    if a <= 0.0 or b <= 0.0:
        raise DomainError(f"incomplete beta requires a, b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"incomplete beta requires 0 <= x <= 1, got {x}")


def log_regularized_incomplete_beta(a, b, x, upper=False):
    """log I_x(a, b), or log(1 - I_x(a, b)) when ``upper`` is true.

    The continued fraction is evaluated on whichever side of the mean
    converges quickly; the requested tail is then recovered without
    subtracting from one whenever that would cancel.
    """
    a, b, x = float(a), float(b), float(x)
    _check_beta_args(a, b, x)
    if x == 0.0:
        return 0.0 if upper else -math.inf
    if x == 1.0:
        return -math.inf if upper else 0.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        log_lower = log_front + math.log(_betacf(a, b, x)) - math.log(a)
        return log1mexp(min(log_lower, 0.0)) if upper else log_lower
    log_upper = log_front + math.log(_betacf(b, a, 1.0 - x)) - math.log(b)
    return log_upper if upper else log1mexp(min(log_upper, 0.0))


def regularized_incomplete_beta(a, b, x):
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    return math.exp(log_regularized_incomplete_beta(a, b, x))


# -- incomplete gamma ------------------------------------------------------


def _gamma_series(a, x):
    # log P(a, x) by the power series, valid for x < a + 1.
    ap = a
    total = 1.0 / a
    term = total
    for _ in range(MAX_ITER * 10):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            return math.log(total) - x + a * math.log(x) - math.lgamma(a)
    raise ConvergenceError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cf(a, x):
    # log Q(a, x) by the Legendre continued fraction, valid for x >= a + 1.
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return math.log(h) - x + a * math.log(x) - math.lgamma(a)
    raise ConvergenceError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def log_regularized_lower_incomplete_gamma(a, x, upper=False):
    """log P(a, x), or log Q(a, x) = log(1 - P(a, x)) when ``upper`` is true."""
    a, x = float(a), float(x)
    _check_finite("a", a)
    if math.isnan(x):
        raise DomainError("incomplete gamma of NaN")
    if a <= 0.0:
        raise DomainError(f"incomplete gamma requires a > 0, got {a}")
    if x < 0.0:
        raise DomainError(f"incomplete gamma requires x >= 0, got {x}")
    if x == 0.0:
        return 0.0 if upper else -math.inf
    if x == math.inf:
        return -math.inf if upper else 0.0
    if x < a + 1.0:
        log_p = _gamma_series(a, x)
        return log1mexp(min(log_p, 0.0)) if upper else log_p
    log_q = _gamma_cf(a, x)
    return log_q if upper else log1mexp(min(log_q, 0.0))


def regularized_lower_incomplete_gamma(a, x):
    """P(a, x) = gamma(a, x) / Gamma(a)."""
    return math.exp(log_regularized_lower_incomplete_gamma(a, x))


# -- polygamma -------------------------------------------------------------

_SHIFT = 10.0


def digamma(x):
    """Psi(x) for x > 0."""
    x = float(x)
    _check_finite("x", x)
    if x <= 0.0:
        raise DomainError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < _SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
        1.0 / 240 - inv2 * (1.0 / 132)))))
    return acc + math.log(x) - 0.5 / x - series


def trigamma(x):
    """Psi'(x) for x > 0."""
    x = float(x)
    _check_finite("x", x)
    if x <= 0.0:
        raise DomainError(f"trigamma requires x > 0, got {x}")
    acc = 0.0
    while x < _SHIFT:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv + 0.5 * inv2 + inv * inv2 * (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (
        1.0 / 42 - inv2 * (1.0 / 30 - inv2 * (5.0 / 66)))))
    return acc + series
