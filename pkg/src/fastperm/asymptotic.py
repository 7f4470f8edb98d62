"""Closed-form approximations to partition and overall p-values.

Within partition m the permuted statistic is a smooth function of W(m),
whose exact mean and variance are known.  A first-order expansion turns the
partition p-value into two normal tails, one for each direction of the
two-sided statistic.  Weighting these by f(m) gives the overall estimate.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConvergenceError, DomainError, UnsupportedError
from .partitions import partition_weights
from .special import log_std_normal_sf, logaddexp, std_normal_quantile
from .statistics import StatisticKind, TwoSample, g_family, observed_statistic

LN10 = math.log(10.0)
REFLECTIONS = ("exact", "published")
N_HAT_CAP = 10 ** 6


@dataclass(frozen=True)
class AsymReport:
    log10_p: float
    m_max: int
    per_partition_log_h: np.ndarray = None

    @property
    def p(self):
        return 10.0 ** self.log10_p


def _summary(data):
    return data.summary()


def _check_kind(kind):
    kind = StatisticKind.parse(kind)
    if kind is StatisticKind.STUDENTIZED:
        raise UnsupportedError(
            "no asymptotic approximation exists for the studentized statistic; use resampling"
        )
    return kind


def statistic_from_summary(summary, kind):
    """T evaluated at the summary means (no sampling noise)."""
    kind = _check_kind(kind)
    if kind is StatisticKind.ABS_DIFF:
        return abs(summary.mean_x - summary.mean_y)
    if summary.mean_x <= 0 or summary.mean_y <= 0:
        raise DomainError("max-ratio statistic needs positive means")
    r = summary.mean_x / summary.mean_y
    return max(r, 1.0 / r)


def _resolve_t(data, kind, t):
    if t is not None:
        return float(t)
    if isinstance(data, TwoSample):
        return observed_statistic(data, kind)
    return statistic_from_summary(data, kind)


def _moments(s, m):
    m = np.asarray(m, dtype=float)
    mu = m * (s.mean_y - s.mean_x)
    vy = (s.n_y - m) / s.n_y * s.var_y if s.n_y > 1 else 0.0 * m
    vx = (s.n_x - m) / s.n_x * s.var_x if s.n_x > 1 else 0.0 * m
    return mu, np.maximum(m * (vx + vy), 0.0)


def _xi_pair(s, kind, m, t):
    mu, v = _moments(s, m)
    gv = g_family(s, kind, mu)
    sd = np.sqrt(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = (t - gv.g) / (gv.dg * sd)
        xi_c = (t - gv.g_con) / (np.abs(gv.dg_con) * sd)
    return xi, xi_c, v, gv


def _check_m(s, m):
    n_min = min(s.n_x, s.n_y)
    top = n_min - 1 if s.n_x == s.n_y else n_min
    if int(m) != m or not 1 <= m <= top:
        raise DomainError(f"m={m} outside [1, {top}]")


def xi(data, kind, m, t):
    """Standardised distance from t to the centre of partition m."""
    s = _summary(data)
    kind = _check_kind(kind)
    _check_m(s, m)
    value, _, v, _ = _xi_pair(s, kind, m, t)
    if v <= 0:
        raise DomainError(f"partition {m} is degenerate: V(m) = 0")
    return float(value)


def xi_conj(data, kind, m, t):
    """As ``xi`` for the conjugate (group-swapped) statistic.

    The conjugate map is decreasing in W, so its derivative enters by
    absolute value and the resulting tail is again an upper tail.
    """
    s = _summary(data)
    kind = _check_kind(kind)
    _check_m(s, m)
    _, value, v, _ = _xi_pair(s, kind, m, t)
    if v <= 0:
        raise DomainError(f"partition {m} is degenerate: V(m) = 0")
    return float(value)


def reflect(weights, m, reflection="exact"):
    """Partition whose approximation stands in for partition m.

    "exact" mirrors about the centre of f: n - m for equal sizes, or
    2 m_max - m otherwise.  "published" mirrors about m_max + 1, which is the
    convention behind the sample-size tables this package is checked against.
    """
    if reflection == "exact":
        if weights.equal_sizes:
            return min(m, weights.n_x - m)
        return min(m, 2 * weights.m_max - m)
    if reflection == "published":
        return min(m, 2 * (weights.m_max + 1) - m)
    raise DomainError(f"unknown reflection {reflection!r}; choose from {REFLECTIONS}")


def _log_h(s, kind, m, t):
    # log of 2 - Phi(xi) - Phi(xi_conj), clamped to <= 0.
    xi_v, xi_c, v, gv = _xi_pair(s, kind, m, t)
    if v <= 0:
        # W(m) is constant, so the partition is all-or-nothing.
        hit = max(gv.g, gv.g_con) >= t - 1e-12 * max(abs(t), 1.0)
        return 0.0 if hit else -math.inf
    return min(logaddexp(log_std_normal_sf(float(xi_v)), log_std_normal_sf(float(xi_c))), 0.0)


def partition_pvalue_asym(data, kind, m, t=None, reflection="exact"):
    """Approximate p-value within partition m."""
    return math.exp(_partition_log_h(data, kind, m, t, reflection))


def _partition_log_h(data, kind, m, t, reflection, weights=None):
    s = _summary(data)
    kind = _check_kind(kind)
    t = _resolve_t(data, kind, t)
    n_min = min(s.n_x, s.n_y)
    if int(m) != m or not 0 <= m <= n_min:
        raise DomainError(f"m={m} outside [0, {n_min}]")
    if m == 0 or (s.n_x == s.n_y and m == n_min):
        return 0.0
    w = weights if weights is not None else partition_weights(s.n_x, s.n_y)
    mp = reflect(w, int(m), reflection)
    if mp <= 0:
        return 0.0
    return _log_h(s, kind, mp, t)


def p_asym(data, kind, t=None, reflection="exact", diagnostics=False):
    """Weighted sum of approximate partition p-values, in log space."""
    s = _summary(data)
    kind = _check_kind(kind)
    t = _resolve_t(data, kind, t)
    w = partition_weights(s.n_x, s.n_y)
    n_min = w.n_min
    log_h = np.empty(n_min + 1)
    cache = {}
    for m in range(n_min + 1):
        mp = 0 if m == 0 else reflect(w, m, reflection)
        if m == 0 or mp <= 0 or (w.equal_sizes and m == n_min):
            log_h[m] = 0.0
            continue
        if mp not in cache:
            cache[mp] = _log_h(s, kind, mp, t)
        log_h[m] = cache[mp]
    terms = log_h + w.log_f
    top = terms.max()
    log_p = top + math.log(np.exp(terms - top).sum()) if np.isfinite(top) else -math.inf
    # Every partition certain: the weights sum to one, so report exactly zero.
    log_p = 0.0 if np.all(log_h == 0.0) else min(log_p, 0.0)
    if diagnostics:
        log_h.setflags(write=False)
    return AsymReport(log_p / LN10, w.m_max, log_h if diagnostics else None)


def m_stop_asym(data, kind, t=None, b_pred=1000, limit=None):
    """Predicted stopping partition of the stratified resampler.

    Smallest m in [1, limit] whose approximate partition p-value falls below
    1/b_pred, i.e. xi(m) > z_{1-1/b_pred}.  ``limit`` defaults to m_max.  When
    no partition crosses the threshold, m_max is returned.
    """
    s = _summary(data)
    kind = _check_kind(kind)
    if int(b_pred) != b_pred or b_pred < 2:
        raise DomainError(f"b_pred must be an integer >= 2, got {b_pred}")
    t = _resolve_t(data, kind, t)
    m_max = partition_weights(s.n_x, s.n_y).m_max
    n_min = min(s.n_x, s.n_y)
    hi = m_max if limit is None else int(limit)
    hi = min(hi, n_min - 1 if s.n_x == s.n_y else n_min)
    if hi < 1:
        return max(m_max, 1)
    z = std_normal_quantile(1.0 - 1.0 / b_pred)
    ms = np.arange(1, hi + 1)
    values, _, v, _ = _xi_pair(s, kind, ms, t)
    crossed = np.nonzero((v > 0) & (values > z))[0]
    if crossed.size:
        return int(ms[crossed[0]])
    return max(m_max, 1)


def n_hat(params, kind, b_pred=1000, c=4, cap=N_HAT_CAP):
    """Smallest equal group size n whose predicted m_stop reaches c.

    ``params`` supplies means and variances; its sizes are ignored.  The
    threshold search covers every non-trivial partition, m = 1..n-1.
    """
    kind = _check_kind(kind)
    t = statistic_from_summary(params, kind)
    for n in range(2, cap + 1):
        s = params.with_sizes(n, n)
        if m_stop_asym(s, kind, t, b_pred, limit=n - 1) >= c:
            return n
    raise ConvergenceError(f"no n <= {cap} reaches m_stop >= {c}")
