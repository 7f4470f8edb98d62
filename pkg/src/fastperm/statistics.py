"""Two-sample containers, test statistics and within-partition moments."""

from dataclasses import dataclass, field
import enum
import math

import numpy as np

from .errors import DataError, DomainError, UnsupportedError

# Relative slack used when comparing a permuted statistic with the observed
# one.  Incremental updates and the from-scratch value can differ in the last
# few ulps; without slack an exact tie (which the >= comparison must count)
# could be missed.
TIE_RTOL = 1e-10


class StatisticKind(enum.Enum):
    ABS_DIFF = "abs-diff"
    MAX_RATIO = "max-ratio"
    STUDENTIZED = "studentized"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise UnsupportedError(f"unknown statistic {value!r}")


@dataclass(frozen=True)
class TwoSample:
    """Raw observations for two groups with cached sufficient summaries."""

    x: np.ndarray
    y: np.ndarray
    n_x: int = field(init=False)
    n_y: int = field(init=False)
    mean_x: float = field(init=False)
    mean_y: float = field(init=False)
    css_x: float = field(init=False)
    css_y: float = field(init=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=float).ravel()
        y = np.array(self.y, dtype=float).ravel()
        if x.size < 1 or y.size < 1:
            raise DataError("both groups need at least one observation")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("observations must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        set_ = object.__setattr__
        set_(self, "x", x)
        set_(self, "y", y)
        set_(self, "n_x", x.size)
        set_(self, "n_y", y.size)
        set_(self, "mean_x", float(x.mean()))
        set_(self, "mean_y", float(y.mean()))
        set_(self, "css_x", float(np.sum((x - x.mean()) ** 2)))
        set_(self, "css_y", float(np.sum((y - y.mean()) ** 2)))

    @property
    def var_x(self):
        return self.css_x / (self.n_x - 1) if self.n_x > 1 else 0.0

    @property
    def var_y(self):
        return self.css_y / (self.n_y - 1) if self.n_y > 1 else 0.0

    def summary(self):
        return SummaryPair(self.n_x, self.n_y, self.mean_x, self.mean_y, self.var_x, self.var_y)

    def swapped(self):
        return TwoSample(self.y, self.x)


@dataclass(frozen=True)
class SummaryPair:
    """Group sizes, means and variances without the raw data."""

    n_x: int
    n_y: int
    mean_x: float
    mean_y: float
    var_x: float
    var_y: float

    def __post_init__(self):
        if int(self.n_x) != self.n_x or int(self.n_y) != self.n_y:
            raise DataError("group sizes must be integers")
        if self.n_x < 1 or self.n_y < 1:
            raise DataError("group sizes must be at least 1")
        if self.var_x < 0 or self.var_y < 0:
            raise DataError("variances must be nonnegative")
        for v in (self.mean_x, self.mean_y, self.var_x, self.var_y):
            if not math.isfinite(v):
                raise DataError("summary values must be finite")

    @property
    def css_x(self):
        return (self.n_x - 1) * self.var_x

    @property
    def css_y(self):
        return (self.n_y - 1) * self.var_y

    def summary(self):
        return self

    def with_sizes(self, n_x, n_y):
        return SummaryPair(n_x, n_y, self.mean_x, self.mean_y, self.var_x, self.var_y)


@dataclass(frozen=True)
class PartitionMoments:
    m: int
    mu: float
    v: float


@dataclass(frozen=True)
class GValues:
    """g, g', g_con and g_con' evaluated at one value of W."""

    g: float
    dg: float
    g_con: float
    dg_con: float


def _check_kind_data(data, kind):
    if kind is StatisticKind.MAX_RATIO:
        # Zeros are allowed (count data) as long as neither group mean is zero.
        if np.any(data.x < 0) or np.any(data.y < 0):
            raise DataError("max-ratio statistic needs nonnegative data")
        if data.mean_x <= 0 or data.mean_y <= 0:
            raise DataError("max-ratio statistic needs positive group means")
    elif kind is StatisticKind.STUDENTIZED:
        if data.n_x < 2 or data.n_y < 2:
            raise DataError("studentized statistic needs at least two observations per group")


def _from_moments(kind, n_x, n_y, mx, my, css_x, css_y):
    if kind is StatisticKind.ABS_DIFF:
        return abs(mx - my)
    if kind is StatisticKind.MAX_RATIO:
        r = mx / my
        return max(r, 1.0 / r)
    se2 = css_x / ((n_x - 1) * n_x) + css_y / ((n_y - 1) * n_y)
    if se2 <= 0:
        raise DataError("studentized statistic undefined: both groups have zero variance")
    return abs(mx - my) / math.sqrt(se2)


def observed_statistic(data, kind):
    """T(x, y) for the observed group assignment."""
    kind = StatisticKind.parse(kind)
    _check_kind_data(data, kind)
    return _from_moments(
        kind, data.n_x, data.n_y, data.mean_x, data.mean_y, data.css_x, data.css_y
    )


def permuted_statistic(data, kind, sel):
    """T after exchanging ``sel.from_x`` with ``sel.from_y``, updated in O(m)."""
    kind = StatisticKind.parse(kind)
    fx = np.asarray(sel.from_x, dtype=np.intp)
    fy = np.asarray(sel.from_y, dtype=np.intp)
    if fx.size != fy.size:
        raise DomainError("exchange must move the same number of elements each way")
    if fx.size and (fx.min() < 0 or fx.max() >= data.n_x or fy.min() < 0 or fy.max() >= data.n_y):
        raise DomainError("exchange index out of range")
    return float(permuted_statistics(data, kind, fx[None, :], fy[None, :])[0])


def permuted_statistics(data, kind, from_x, from_y):
    """Vectorised ``permuted_statistic`` over rows of two index matrices.

    Values are shifted by the pooled mean first, which leaves the difference
    and studentized statistics unchanged and keeps the incremental sums of
    squares away from catastrophic cancellation.
    """
    kind = StatisticKind.parse(kind)
    n_x, n_y = data.n_x, data.n_y
    if kind is StatisticKind.MAX_RATIO:
        shift = 0.0
    else:
        shift = (n_x * data.mean_x + n_y * data.mean_y) / (n_x + n_y)
    xc = data.x - shift
    yc = data.y - shift
    sx = xc[from_x].sum(axis=1)
    sy = yc[from_y].sum(axis=1)
    w = sy - sx
    mx = (data.mean_x - shift) + w / n_x
    my = (data.mean_y - shift) - w / n_y
    if kind is StatisticKind.ABS_DIFF:
        return np.abs(mx - my)
    if kind is StatisticKind.MAX_RATIO:
        with np.errstate(divide="ignore"):
            r = mx / my
            return np.maximum(r, 1.0 / r)
    qx = float(np.dot(xc, xc))
    qy = float(np.dot(yc, yc))
    dq = (yc[from_y] ** 2).sum(axis=1) - (xc[from_x] ** 2).sum(axis=1)
    css_x = np.maximum(qx + dq - n_x * mx * mx, 0.0)
    css_y = np.maximum(qy - dq - n_y * my * my, 0.0)
    se2 = css_x / ((n_x - 1) * n_x) + css_y / ((n_y - 1) * n_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(mx - my) / np.sqrt(se2)
    # A permutation with zero pooled spread and equal means is not extreme.
    return np.where(se2 > 0, out, np.where(np.abs(mx - my) > 0, np.inf, 0.0))


def exceedance_threshold(data, kind, t):
    """Smallest value counted as T_b >= t once rounding slack is allowed.

    For the difference statistic the rounding error of the incremental means
    scales with the data, not with t, so an absolute term is added.
    """
    kind = StatisticKind.parse(kind)
    slack = TIE_RTOL * abs(t)
    if kind is StatisticKind.ABS_DIFF:
        spread = max(np.max(np.abs(data.x - data.mean_x), initial=0.0),
                     np.max(np.abs(data.y - data.mean_y), initial=0.0),
                     abs(data.mean_x - data.mean_y))
        slack += 64 * np.finfo(float).eps * spread
    return t - slack


def recompute_statistic(data, kind, sel):
    """From-scratch T after an exchange; reference for the incremental path."""
    kind = StatisticKind.parse(kind)
    fx = np.asarray(sel.from_x, dtype=np.intp)
    fy = np.asarray(sel.from_y, dtype=np.intp)
    x = data.x.copy()
    y = data.y.copy()
    x[fx], y[fy] = data.y[fy], data.x[fx]
    return observed_statistic(TwoSample(x, y), kind)


def partition_moments(data, m):
    """Exact mean and variance of W(m) over the exchanges in partition m.

    W(m) is the sum of the y values moved into x minus the sum of the x
    values moved into y.  Works for raw data and for plug-in summaries.
    """
    n_x, n_y = data.n_x, data.n_y
    if int(m) != m or not 0 <= m <= min(n_x, n_y):
        raise DomainError(f"m={m} outside [0, {min(n_x, n_y)}]")
    m = int(m)
    mu = m * (data.mean_y - data.mean_x)
    vy = (n_y - m) / (n_y * (n_y - 1)) * data.css_y if n_y > 1 else 0.0
    vx = (n_x - m) / (n_x * (n_x - 1)) * data.css_x if n_x > 1 else 0.0
    return PartitionMoments(m, mu, max(m * (vx + vy), 0.0))


def g_family(data, kind, w):
    """The statistic as a smooth function of W, its conjugate, and derivatives.

    g maps W to the signed permuted statistic (x̄*-ȳ* or x̄*/ȳ*); g_con is the
    same map with the groups swapped, i.e. ȳ*-x̄* or ȳ*/x̄*.  ``w`` may be
    an array.
    """
    kind = StatisticKind.parse(kind)
    n_x, n_y = data.n_x, data.n_y
    mx, my = data.mean_x, data.mean_y
    if kind is StatisticKind.ABS_DIFF:
        k = 1.0 / n_x + 1.0 / n_y
        return GValues(mx - my + k * w, k, my - mx - k * w, -k)
    if kind is StatisticKind.MAX_RATIO:
        top = n_x * mx + w
        bot = n_y * my - w
        if np.any(top <= 0) or np.any(bot <= 0):
            raise DomainError("max-ratio g undefined: permuted group mean is not positive")
        s = n_x * mx + n_y * my
        return GValues(
            n_y / n_x * top / bot,
            n_y / n_x * s / bot ** 2,
            n_x / n_y * bot / top,
            -n_x / n_y * s / top ** 2,
        )
    raise UnsupportedError("the studentized statistic has no closed-form g; use resampling")
