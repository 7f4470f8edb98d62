"""Monte Carlo p-value estimators.

``p_simple_mc`` is the plain unadjusted exceedance proportion.  ``p_pred``
samples one partition at a time, stops at the first partition with no
exceedances, fits a Poisson log-linear trend to the counts and extrapolates
into the partitions it never reached.
"""

from dataclasses import dataclass
import math

import numpy as np

from .asymptotic import LN10, reflect
from .errors import DataError, DomainError
from .glm import PoissonFit, fit as fit_poisson, predict_log_count
from .partitions import partition_weights, sample_exchanges
from .seeding import make_rng
from .statistics import (
    StatisticKind,
    exceedance_threshold,
    observed_statistic,
    permuted_statistics,
)

# Upper bound on the number of gathered elements held in memory per chunk.
CHUNK_ELEMENTS = 1 << 21

STATUS_OK = "ok"
STATUS_BELOW = "below_resolution"


@dataclass(frozen=True)
class SimpleMCResult:
    p: float
    exceedances: int
    b: int

    @property
    def log10_p(self):
        return math.log10(self.p) if self.p > 0 else -math.inf


@dataclass(frozen=True)
class PartitionCounts:
    b_pred: int
    counts: np.ndarray
    m_stop: int
    m_reg: int


@dataclass(frozen=True)
class PredReport:
    """Result of the stratified resampling estimator.

    When the first partition already has no exceedances the trend cannot be
    fitted; ``status`` is then "below_resolution", ``fit`` is None and
    ``log10_p`` is the mass of the partitions that always tie the observed
    statistic, a floor for the true p-value.
    """

    log10_p: float
    counts: PartitionCounts
    fit: PoissonFit
    total_iterations: int
    seed: int
    status: str = STATUS_OK
    imbalance: float = 1.0
    method: str = "alg1"

    @property
    def m_stop(self):
        return self.counts.m_stop


def _rng(rng, seed):
    if rng is not None:
        return rng
    if seed is None:
        raise DomainError("pass either rng or seed")
    return make_rng(seed)


def _group_stats(kind, n_x, n_y, sx, qx, total, qtotal):
    # Statistic from the x-group sum and sum of squares of centred values.
    mx = sx / n_x
    my = (total - sx) / n_y
    if kind is StatisticKind.ABS_DIFF:
        return np.abs(mx - my)
    if kind is StatisticKind.MAX_RATIO:
        with np.errstate(divide="ignore"):
            r = mx / my
            return np.maximum(r, 1.0 / r)
    css_x = np.maximum(qx - n_x * mx * mx, 0.0)
    css_y = np.maximum(qtotal - qx - n_y * my * my, 0.0)
    se2 = css_x / ((n_x - 1) * n_x) + css_y / ((n_y - 1) * n_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(mx - my) / np.sqrt(se2)
    return np.where(se2 > 0, out, np.where(np.abs(mx - my) > 0, np.inf, 0.0))


def p_simple_mc(data, kind, b, rng=None, seed=None):
    """Proportion of B random reassignments with T_b >= t (no +1 correction)."""
    kind = StatisticKind.parse(kind)
    if int(b) != b or b < 1:
        raise DomainError(f"B must be a positive integer, got {b}")
    b = int(b)
    rng = _rng(rng, seed)
    t = observed_statistic(data, kind)
    thr = exceedance_threshold(data, kind, t)
    n_x, n_y = data.n_x, data.n_y
    pooled = np.concatenate([data.x, data.y])
    if kind is not StatisticKind.MAX_RATIO:
        pooled = pooled - pooled.mean()
    total = pooled.sum()
    sq = pooled * pooled
    qtotal = sq.sum()
    N = n_x + n_y
    chunk = max(1, CHUNK_ELEMENTS // N)
    hits = 0
    done = 0
    while done < b:
        k = min(chunk, b - done)
        keys = rng.random((k, N))
        idx = np.argpartition(keys, n_x - 1, axis=1)[:, :n_x]
        sx = pooled[idx].sum(axis=1)
        qx = sq[idx].sum(axis=1)
        stats = _group_stats(kind, n_x, n_y, sx, qx, total, qtotal)
        hits += int(np.count_nonzero(stats >= thr))
        done += k
    return SimpleMCResult(hits / b, hits, b)


def partition_mc(data, kind, m, b, rng=None, seed=None, t=None):
    """Number of B uniform draws from partition m with T_b >= t."""
    kind = StatisticKind.parse(kind)
    n_min = min(data.n_x, data.n_y)
    if int(m) != m or not 0 <= m <= n_min:
        raise DomainError(f"m={m} outside [0, {n_min}]")
    if int(b) != b or b < 1:
        raise DomainError(f"B must be a positive integer, got {b}")
    m, b = int(m), int(b)
    rng = _rng(rng, seed)
    if t is None:
        t = observed_statistic(data, kind)
    thr = exceedance_threshold(data, kind, t)
    chunk = max(1, CHUNK_ELEMENTS // max(2 * m, 1))
    hits = 0
    done = 0
    while done < b:
        k = min(chunk, b - done)
        fx, fy = sample_exchanges(rng, data.n_x, data.n_y, m, k)
        stats = permuted_statistics(data, kind, fx, fy)
        hits += int(np.count_nonzero(stats >= thr))
        done += k
    return hits


def _logsumexp(v):
    top = np.max(v)
    if not np.isfinite(top):
        return top
    return top + math.log(np.exp(v - top).sum())


def p_pred(data, kind, b_pred=1000, rng=None, seed=None, reflection="exact"):
    """Stratified resampling with Poisson extrapolation of the partition trend."""
    kind = StatisticKind.parse(kind)
    if int(b_pred) != b_pred or b_pred < 2:
        raise DomainError(f"b_pred must be an integer >= 2, got {b_pred}")
    b_pred = int(b_pred)
    if min(data.n_x, data.n_y) < 2:
        raise DataError("the stratified estimator needs at least two observations per group")
    rng = _rng(rng, seed)
    t = observed_statistic(data, kind)
    w = partition_weights(data.n_x, data.n_y)
    n_min, m_max = w.n_min, w.m_max

    counts = [b_pred]
    m = 1
    while m <= m_max and counts[m - 1] > 0:
        counts.append(partition_mc(data, kind, m, b_pred, rng=rng, t=t))
        m += 1
    c = np.array(counts, dtype=np.int64)
    m_stop = c.size - 1
    positive = np.nonzero(c[: m_max + 1] > 0)[0]
    m_reg = int(positive[-1])
    c.setflags(write=False)
    pc = PartitionCounts(b_pred, c, m_stop, m_reg)
    imbalance = max(data.n_x, data.n_y) / n_min
    total = b_pred * m_stop

    if m_reg == 0:
        ends = [w.log_f[0]]
        if w.equal_sizes:
            ends.append(w.log_f[n_min])
        log_p = _logsumexp(np.array(ends))
        return PredReport(log_p / LN10, pc, None, total, seed, STATUS_BELOW, imbalance)

    fitted = fit_poisson(np.arange(m_reg + 1), c[: m_reg + 1])
    log_b = math.log(b_pred)
    logc = np.empty(n_min + 1)
    logc[0] = log_b
    for mm in range(1, n_min + 1):
        mp = reflect(w, mm, reflection)
        logc[mm] = log_b if mp <= 0 else predict_log_count(fitted, mp)
    if w.equal_sizes:
        logc[n_min] = log_b
    log_p = min(_logsumexp(logc + w.log_f) - log_b, 0.0)
    return PredReport(log_p / LN10, pc, fitted, total, seed, STATUS_OK, imbalance)
