"""Partitions of the permutation space by the number of exchanged elements."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DataError, DomainError
from .special import log_gamma


@dataclass(frozen=True)
class PartitionWeights:
    """log f(m) for m = 0..n_min, where f(m) = C(n_x,m) C(n_y,m) / C(N,n_min)."""

    n_x: int
    n_y: int
    log_f: np.ndarray
    m_max: int

    @property
    def n_min(self):
        return min(self.n_x, self.n_y)

    @property
    def equal_sizes(self):
        return self.n_x == self.n_y


@dataclass(frozen=True)
class ExchangeSelection:
    """Indices of the x and y observations swapped between groups."""

    from_x: np.ndarray
    from_y: np.ndarray

    @property
    def m(self):
        return len(self.from_x)


def distance(perm, n_x):
    """Number of exchanged observations under a permutation of 1..N.

    ``perm[i]`` is the (1-based) original index placed at position i.  The
    first ``n_x`` positions form the permuted x group.
    """
    perm = np.asarray(perm)
    N = perm.size
    if not 1 <= n_x < N:
        raise DomainError(f"need 1 <= n_x < N, got n_x={n_x}, N={N}")
    if perm.dtype.kind not in "iu":
        raise DomainError("permutation must contain integers")
    if perm.min() < 1 or perm.max() > N or np.unique(perm).size != N:
        raise DomainError("not a permutation of 1..N")
    stayed = np.count_nonzero(perm[:n_x] <= n_x)
    return int(n_x - stayed)


def _log_choose(n, k):
    return log_gamma(n + 1) - log_gamma(k + 1) - log_gamma(n - k + 1)


def _mode(n_x, n_y):
    # f(m+1)/f(m) = (n_x-m)(n_y-m)/(m+1)^2, so the mode is the first m where the
    # ratio drops to <= 1.  Integer arithmetic breaks ties toward the smaller m.
    n_min = min(n_x, n_y)
    lo, hi = 0, n_min
    while lo < hi:
        mid = (lo + hi) // 2
        if (n_x - mid) * (n_y - mid) <= (mid + 1) ** 2:
            hi = mid
        else:
            lo = mid + 1
    return lo


def partition_weights(n_x, n_y):
    """Partition probabilities in log space for group sizes (n_x, n_y)."""
    if int(n_x) != n_x or int(n_y) != n_y:
        raise DataError("group sizes must be integers")
    n_x, n_y = int(n_x), int(n_y)
    if n_x < 1 or n_y < 1:
        raise DataError(f"both groups need at least one observation, got {n_x}, {n_y}")
    n_min = min(n_x, n_y)
    m = np.arange(n_min + 1, dtype=float)
    lg = np.vectorize(math.lgamma, otypes=[float])
    unnorm = (
        lg(n_x + 1.0) - lg(n_x - m + 1.0) + lg(n_y + 1.0) - lg(n_y - m + 1.0)
        - 2.0 * lg(m + 1.0)
    )
    top = unnorm.max()
    log_norm = top + math.log(np.exp(unnorm - top).sum())
    closed = _log_choose(n_x + n_y, n_min)
    if abs(log_norm - closed) > 1e-9 * max(1.0, abs(closed)):
        raise ArithmeticError(
            f"normalizing constant mismatch: {log_norm} vs closed form {closed}"
        )
    log_f = unnorm - log_norm
    if n_x == n_y:
        # Enforce exact palindrome against rounding in lgamma.
        log_f = 0.5 * (log_f + log_f[::-1])
    # Second pass with a compensated sum so the weights add to one in linear space.
    log_f = log_f - math.log(math.fsum(np.exp(log_f)))
    log_f.setflags(write=False)
    return PartitionWeights(n_x, n_y, log_f, _mode(n_x, n_y))


def sample_exchange(rng, n_x, n_y, m):
    """Uniform draw from the C(n_x,m) C(n_y,m) exchanges of size m."""
    if not 0 <= m <= min(n_x, n_y):
        raise DomainError(f"m={m} outside [0, {min(n_x, n_y)}]")
    return ExchangeSelection(_partial_shuffle(rng, n_x, m), _partial_shuffle(rng, n_y, m))


def _partial_shuffle(rng, n, m):
    idx = np.arange(n)
    for i in range(m):
        j = rng.integers(i, n)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:m].copy()


def sample_exchanges(rng, n_x, n_y, m, size):
    """``size`` independent exchanges of size m, as two index matrices.

    Each row of a random-key matrix is argpartitioned, so each row's first m
    columns are a uniform m-subset.  This is the vectorised equivalent of
    repeated ``sample_exchange`` calls and is what the resamplers use.
    """
    if not 0 <= m <= min(n_x, n_y):
        raise DomainError(f"m={m} outside [0, {min(n_x, n_y)}]")
    return _subsets(rng, n_x, m, size), _subsets(rng, n_y, m, size)


def _subsets(rng, n, m, size):
    if m == 0:
        return np.empty((size, 0), dtype=np.intp)
    if m == n:
        return np.broadcast_to(np.arange(n), (size, n))
    keys = rng.random((size, n))
    return np.argpartition(keys, m - 1, axis=1)[:, :m]
