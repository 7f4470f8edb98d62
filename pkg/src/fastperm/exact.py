"""Exhaustive enumeration, for small samples and as a reference in tests."""

from itertools import combinations
import math

import numpy as np

from .errors import DomainError
from .partitions import partition_weights
from .statistics import (
    StatisticKind,
    exceedance_threshold,
    observed_statistic,
    permuted_statistics,
)

MAX_ENUMERATION = 2_000_000


def _all_subsets(n, m):
    rows = list(combinations(range(n), m))
    return np.array(rows, dtype=np.intp).reshape(len(rows), m)


def _check_size(count):
    if count > MAX_ENUMERATION:
        raise DomainError(f"enumeration of {count} arrangements exceeds the limit {MAX_ENUMERATION}")


def exchange_grid(n_x, n_y, m):
    """Every (from_x, from_y) pair of partition m as two index matrices."""
    _check_size(math.comb(n_x, m) * math.comb(n_y, m))
    ax = _all_subsets(n_x, m)
    ay = _all_subsets(n_y, m)
    fx = np.repeat(ax, len(ay), axis=0)
    fy = np.tile(ay, (len(ax), 1))
    return fx, fy


def partition_pvalues(data, kind):
    """Exact proportion of each partition with T >= t, for m = 0..n_min."""
    kind = StatisticKind.parse(kind)
    t = observed_statistic(data, kind)
    thr = exceedance_threshold(data, kind, t)
    out = np.empty(min(data.n_x, data.n_y) + 1)
    for m in range(out.size):
        fx, fy = exchange_grid(data.n_x, data.n_y, m)
        out[m] = np.mean(permuted_statistics(data, kind, fx, fy) >= thr)
    return out


def decomposed_pvalue(data, kind):
    """Sum over partitions of the exact partition p-value times f(m)."""
    w = partition_weights(data.n_x, data.n_y)
    return float(np.sum(partition_pvalues(data, kind) * np.exp(w.log_f)))


def permutation_pvalue(data, kind):
    """Exact p-value by reassigning every n_x-subset of the pooled data.

    Group means are recomputed from the reassigned vectors, independently of
    the incremental exchange updates.
    """
    kind = StatisticKind.parse(kind)
    t = observed_statistic(data, kind)
    thr = exceedance_threshold(data, kind, t)
    pooled = np.concatenate([data.x, data.y])
    N = pooled.size
    _check_size(math.comb(N, data.n_x))
    hits = 0
    total = 0
    for idx in combinations(range(N), data.n_x):
        mask = np.zeros(N, dtype=bool)
        mask[list(idx)] = True
        x, y = pooled[mask], pooled[~mask]
        mx, my = x.mean(), y.mean()
        if kind is StatisticKind.ABS_DIFF:
            stat = abs(mx - my)
        elif kind is StatisticKind.MAX_RATIO:
            stat = max(mx / my, my / mx)
        else:
            se2 = x.var(ddof=1) / x.size + y.var(ddof=1) / y.size
            stat = abs(mx - my) / math.sqrt(se2) if se2 > 0 else (math.inf if mx != my else 0.0)
        hits += stat >= thr
        total += 1
    return hits / total


def exchange_sums(data, m):
    """W(m) for every exchange in partition m."""
    fx, fy = exchange_grid(data.n_x, data.n_y, m)
    return data.y[fy].sum(axis=1) - data.x[fx].sum(axis=1)

