"""Simulation scenarios comparing the estimators with parametric baselines.

A scenario names a data-generating distribution for each group, the sample
sizes, a statistic and a set of methods.  ``run_scenario`` draws the
replicate datasets, applies every method and returns tidy rows; the CSV
writer turns these into the harness output format.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import io
import math

import numpy as np

from .asymptotic import m_stop_asym, p_asym
from .errors import DataError, UnsupportedError
from .oracles import gamma_mle, p_beta_prime, p_delta_ratio, p_saddlepoint_gamma_diff, p_t_test
from .resampling import p_pred, p_simple_mc, partition_mc
from .seeding import derive_seed, make_rng
from .statistics import StatisticKind, TwoSample, observed_statistic

CSV_HEADER = (
    "scenario_id", "replicate", "method", "statistic", "n_x", "n_y", "log10_p",
    "iterations", "m_stop", "deviance", "aic", "seed",
)

METHODS = ("alg1", "asym", "simple_mc", "t_test", "beta_prime", "saddlepoint", "delta")
MODES = ("compare", "trend")

# Parameters each distribution accepts, with defaults where one is natural.
DISTRIBUTIONS = {
    "normal": {"mean": 0.0, "sd": 1.0},
    "exponential": {"rate": 1.0},
    "gamma": {"shape": 1.0, "rate": 1.0},
    "poisson": {"rate": 1.0},
    "lognormal": {"meanlog": 0.0, "varlog": 1.0},
    "negbinom": {"size": 1.0, "mean": 1.0},
}


def draw(rng, distribution, params, n):
    """n observations from one of the supported distributions."""
    p = {**DISTRIBUTIONS[distribution], **params}
    if distribution == "normal":
        return rng.normal(p["mean"], p["sd"], n)
    if distribution == "exponential":
        return rng.exponential(1.0 / p["rate"], n)
    if distribution == "gamma":
        return rng.gamma(p["shape"], 1.0 / p["rate"], n)
    if distribution == "poisson":
        return rng.poisson(p["rate"], n).astype(float)
    if distribution == "lognormal":
        return rng.lognormal(p["meanlog"], math.sqrt(p["varlog"]), n)
    size = p["size"]
    return rng.negative_binomial(size, size / (size + p["mean"]), n).astype(float)


def _check_params(distribution, params):
    if distribution not in DISTRIBUTIONS:
        raise UnsupportedError(f"unknown distribution {distribution!r}")
    allowed = DISTRIBUTIONS[distribution]
    for key, value in params.items():
        if key not in allowed:
            raise UnsupportedError(f"{distribution} has no parameter {key!r}")
        if not math.isfinite(value):
            raise DataError(f"parameter {key} must be finite")
    p = {**allowed, **params}
    for key in p:
        if key == "meanlog" or (distribution == "normal" and key == "mean"):
            continue
        if p[key] <= 0:
            raise DataError(f"{distribution} parameter {key} must be positive")


def _default_methods(distribution, kind):
    base = ["alg1", "asym"]
    if kind is StatisticKind.ABS_DIFF and distribution == "normal":
        base.append("t_test")
    elif kind is StatisticKind.MAX_RATIO and distribution in ("exponential", "gamma"):
        base.append("beta_prime")
    elif kind is StatisticKind.ABS_DIFF and distribution == "gamma":
        base.append("saddlepoint")
    if kind is StatisticKind.STUDENTIZED:
        base.remove("asym")
    return tuple(base)


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    distribution: str
    n_x: int
    n_y: int
    kind: StatisticKind = StatisticKind.ABS_DIFF
    params_x: dict = field(default_factory=dict)
    params_y: dict = field(default_factory=dict)
    replicates: int = 100
    methods: tuple = ()
    seed: int = 1
    b_pred: int = 1000
    b_mc: int = 10_000
    alpha: object = 1.0
    mode: str = "compare"

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "kind", StatisticKind.parse(self.kind))
        _check_params(self.distribution, self.params_x)
        _check_params(self.distribution, self.params_y)
        if self.replicates < 1:
            raise DataError("replicates must be at least 1")
        if self.n_x < 2 or self.n_y < 2:
            raise DataError("each group needs at least two observations")
        if self.mode not in MODES:
            raise UnsupportedError(f"unknown mode {self.mode!r}")
        if not self.methods:
            set_(self, "methods", _default_methods(self.distribution, self.kind))
        set_(self, "methods", tuple(self.methods))
        for m in self.methods:
            if m not in METHODS:
                raise UnsupportedError(f"unknown method {m!r}")
        if "asym" in self.methods and self.kind is StatisticKind.STUDENTIZED:
            raise UnsupportedError("method asym does not support the studentized statistic")
        if "beta_prime" in self.methods and self.kind is not StatisticKind.MAX_RATIO:
            raise UnsupportedError("method beta_prime needs the max-ratio statistic")
        if "saddlepoint" in self.methods and self.kind is not StatisticKind.ABS_DIFF:
            raise UnsupportedError("method saddlepoint needs the abs-diff statistic")
        if self.alpha != "mle" and not (isinstance(self.alpha, (int, float)) and self.alpha > 0):
            raise DataError("alpha must be a positive number or 'mle'")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return format(v, ".12g")
    return str(v)


def _row(s, rep, method, seed, log10_p, iterations=0, m_stop=None, deviance=None, aic=None):
    return {
        "scenario_id": s.scenario_id, "replicate": rep, "method": method,
        "statistic": s.kind.value, "n_x": s.n_x, "n_y": s.n_y, "log10_p": log10_p,
        "iterations": iterations, "m_stop": m_stop, "deviance": deviance, "aic": aic,
        "seed": seed,
    }


def _log10(p):
    return math.log10(p) if p > 0 else -math.inf


def _gamma_params(s, data):
    pooled = np.concatenate([data.x, data.y])
    if s.alpha == "mle":
        mle = gamma_mle(pooled)
        return mle.alpha_hat, mle.lambda_hat
    # With the shape held fixed, the rate MLE is shape / pooled mean.
    return float(s.alpha), float(s.alpha) / float(pooled.mean())


def _method_row(s, rep, method, data, rep_seed):
    kind = s.kind
    mseed = derive_seed(rep_seed, method)
    if method == "alg1":
        r = p_pred(data, kind, s.b_pred, seed=mseed)
        dev = r.fit.deviance if r.fit else None
        aic = r.fit.aic if r.fit else None
        return _row(s, rep, method, mseed, r.log10_p, r.total_iterations, r.m_stop, dev, aic)
    if method == "simple_mc":
        r = p_simple_mc(data, kind, s.b_mc, seed=mseed)
        return _row(s, rep, method, mseed, r.log10_p, s.b_mc)
    if method == "asym":
        rep_ = p_asym(data, kind)
        ms = m_stop_asym(data, kind, b_pred=s.b_pred)
        return _row(s, rep, method, rep_seed, rep_.log10_p, 0, ms)
    if method == "t_test":
        return _row(s, rep, method, rep_seed, p_t_test(data, log10=True))
    if method == "delta":
        return _row(s, rep, method, rep_seed, p_delta_ratio(data, log10=True))
    t = observed_statistic(data, kind)
    if method == "beta_prime":
        if kind is not StatisticKind.MAX_RATIO:
            raise UnsupportedError("beta_prime applies to the max-ratio statistic")
        alpha = _gamma_params(s, data)[0]
        return _row(s, rep, method, rep_seed, p_beta_prime(data.n_x, data.n_y, alpha, t, log10=True))
    if kind is not StatisticKind.ABS_DIFF:
        raise UnsupportedError("saddlepoint applies to the difference statistic")
    alpha, lam = _gamma_params(s, data)
    return _row(s, rep, method, rep_seed, _log10(p_saddlepoint_gamma_diff(data.n_x, data.n_y, alpha, lam, t)))


def trend_profile(data, kind, b_per_partition, rng=None, seed=None):
    """Monte Carlo p-value of every partition m = 0..n_min, with no early stop."""
    if rng is None:
        rng = make_rng(seed if seed is not None else 0)
    t = observed_statistic(data, kind)
    n_min = min(data.n_x, data.n_y)
    out = np.empty(n_min + 1)
    for m in range(n_min + 1):
        out[m] = partition_mc(data, kind, m, b_per_partition, rng=rng, t=t) / b_per_partition
    return out


def replicate_data(s, rep):
    rep_seed = derive_seed(s.seed, s.scenario_id, rep)
    rng = make_rng(rep_seed)
    x = draw(rng, s.distribution, s.params_x, s.n_x)
    y = draw(rng, s.distribution, s.params_y, s.n_y)
    return TwoSample(x, y), rep_seed


def _run_replicate(args):
    s, rep = args
    data, rep_seed = replicate_data(s, rep)
    if s.mode == "trend":
        prof = trend_profile(data, s.kind, s.b_pred, seed=derive_seed(rep_seed, "trend"))
        return [
            _row(s, rep, "trend", rep_seed, _log10(p), s.b_pred, m)
            for m, p in enumerate(prof)
        ]
    return [_method_row(s, rep, method, data, rep_seed) for method in s.methods]


def run_scenario(s, workers=1):
    """Rows for every (replicate, method), ordered by replicate then method.

    In trend mode the rows are per partition instead: method is "trend",
    m_stop holds the partition index and log10_p its Monte Carlo p-value.
    """
    jobs = [(s, rep) for rep in range(s.replicates)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        chunks = [_run_replicate(j) for j in jobs]
    return [row for chunk in chunks for row in chunk]


def write_csv(rows, stream):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in CSV_HEADER])


def rows_to_csv(rows):
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


# -- scenario files ----------------------------------------------------------

_INT_KEYS = {"n_x", "n_y", "replicates", "seed", "b_pred", "b_mc"}


def _parse_block(lines, start_line):
    raw = {}
    for lineno, text in lines:
        if "=" not in text:
            raise DataError(f"line {lineno}: expected 'key = value', got {text!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        if not key:
            raise DataError(f"line {lineno}: empty key")
        if key in raw:
            raise DataError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = (lineno, value)

    kw = {"params_x": {}, "params_y": {}}
    for key, (lineno, value) in raw.items():
        try:
            if key == "id":
                kw["scenario_id"] = value
            elif key == "distribution":
                kw["distribution"] = value.lower()
            elif key == "n":
                kw["n_x"] = kw["n_y"] = int(value)
            elif key in _INT_KEYS:
                kw[key] = int(value)
            elif key == "statistic":
                kw["kind"] = StatisticKind.parse(value)
            elif key == "methods":
                kw["methods"] = tuple(m.strip() for m in value.split(",") if m.strip())
            elif key == "alpha":
                kw["alpha"] = "mle" if value.lower() == "mle" else float(value)
            elif key == "mode":
                kw["mode"] = value.lower()
            elif key.startswith(("x.", "y.")):
                kw["params_" + key[0]][key[2:]] = float(value)
            else:
                raise UnsupportedError(f"line {lineno}: unknown key {key!r}")
        except UnsupportedError:
            raise
        except ValueError as exc:
            raise DataError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    for need in ("scenario_id", "distribution", "n_x", "n_y"):
        if need not in kw:
            raise DataError(f"scenario starting at line {start_line} lacks {need.replace('scenario_', '')!r}")
    return Scenario(**kw)


def parse_scenarios(text):
    """Scenarios from 'key = value' blocks separated by blank lines."""
    blocks, current = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            if current:
                blocks.append(current)
                current = []
            continue
        current.append((lineno, stripped))
    if current:
        blocks.append(current)
    if not blocks:
        raise DataError("scenario file contains no scenarios")
    scenarios = [_parse_block(b, b[0][0]) for b in blocks]
    ids = [s.scenario_id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise DataError("scenario ids must be unique")
    return scenarios


def with_overrides(s, **changes):
    return replace(s, **{k: v for k, v in changes.items() if v is not None})
