"""Command-line interface.

Subcommands:
  test      p-values for one two-sample dataset
  batch     screen-then-refine over a feature-by-sample matrix
  plan      predicted stopping partition and recommended sample size
  simulate  run scenario files through the simulation harness

Exit codes: 0 success, 2 usage, 3 bad data, 4 numerical failure.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass
import importlib.resources
import io
import math
import os
import sys

import numpy as np

from . import __version__
from .asymptotic import m_stop_asym, n_hat, p_asym, statistic_from_summary
from .errors import ConvergenceError, DataError, DomainError, FastPermError, UnsupportedError
from .oracles import p_beta_prime, p_delta_ratio, p_t_test
from .resampling import p_pred, p_simple_mc
from .seeding import default_master_seed, derive_seed
from .simharness import parse_scenarios, run_scenario, with_overrides, write_csv
from .statistics import StatisticKind, SummaryPair, TwoSample, observed_statistic

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

TEST_METHODS = ("alg1", "asym", "simple_mc", "t_test", "welch", "beta_prime", "delta")
BATCH_HEADER = (
    "feature_id", "n_x", "n_y", "statistic", "fold_change", "method", "log10_p",
    "status", "m_stop", "iterations", "deviance", "aic", "seed",
)
TEST_HEADER = ("method", "statistic", "log10_p", "status", "m_stop", "iterations", "deviance", "aic", "seed")


class UsageError(FastPermError):
    pass


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return ""
        return format(float(v), ".12g")
    return str(v)


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _float_cell(text, path, lineno):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{path}:{lineno}: value must be finite, got {text!r}")
    return value


def _open_text(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


# -- input parsing -------------------------------------------------------------


def read_column(path):
    """Numbers from a one-column file; a non-numeric first line is a header."""
    values = []
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if lineno == 1 and not _is_number(text.split(",")[0]):
                continue
            values.append(_float_cell(text, path, lineno))
    if not values:
        raise DataError(f"{path}: no values")
    return np.array(values)


def read_value_group(path, x_label=None):
    """Two groups from a value,group CSV with a header row."""
    groups = {}
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            groups.setdefault(row[1].strip(), []).append(_float_cell(row[0].strip(), path, lineno))
    return _two_groups(groups, x_label, path)


def _two_groups(groups, x_label, source):
    labels = list(groups)
    if len(labels) != 2:
        raise DataError(f"{source}: expected exactly two group labels, found {len(labels)}: {labels}")
    if x_label is not None:
        if x_label not in groups:
            raise DataError(f"{source}: group label {x_label!r} not present")
        labels.sort(key=lambda g: g != x_label)
    return labels, TwoSample(groups[labels[0]], groups[labels[1]])


# -- test ----------------------------------------------------------------------


def _test_rows(data, kind, methods, args, seed):
    rows = []
    for method in methods:
        mseed = derive_seed(seed, method)
        row = {"method": method, "statistic": kind.value, "status": "ok", "seed": ""}
        if method == "alg1":
            r = p_pred(data, kind, args.b_pred, seed=mseed, reflection=args.reflection)
            row.update(
                log10_p=r.log10_p, status=r.status, m_stop=r.m_stop,
                iterations=r.total_iterations, seed=mseed,
                deviance=r.fit.deviance if r.fit else None,
                aic=r.fit.aic if r.fit else None,
            )
        elif method == "simple_mc":
            r = p_simple_mc(data, kind, args.b, seed=mseed)
            row.update(log10_p=r.log10_p, iterations=r.b, seed=mseed)
            if r.exceedances == 0:
                row["status"] = f"below_1/{r.b}"
        elif method == "asym":
            rep = p_asym(data, kind, reflection=args.reflection)
            row.update(log10_p=rep.log10_p, m_stop=m_stop_asym(data, kind, b_pred=args.b_pred))
        elif method in ("t_test", "welch"):
            row.update(log10_p=p_t_test(data, equal_variance=method == "t_test", log10=True))
        elif method == "beta_prime":
            if kind is not StatisticKind.MAX_RATIO:
                raise UnsupportedError("method beta_prime needs --stat max-ratio")
            t = observed_statistic(data, kind)
            row.update(log10_p=p_beta_prime(data.n_x, data.n_y, args.alpha, t, log10=True))
        elif method == "delta":
            row.update(log10_p=p_delta_ratio(data, log10=True))
        rows.append(row)
    return rows


def _methods(text, allowed):
    methods = [m.strip() for m in text.split(",") if m.strip()]
    if not methods:
        raise UsageError("no methods given")
    for m in methods:
        if m not in allowed:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(allowed)}")
    return methods


def cmd_test(args, out):
    kind = StatisticKind.parse(args.stat)
    methods = _methods(args.method, TEST_METHODS)
    if kind is StatisticKind.STUDENTIZED and "asym" in methods:
        raise UsageError("method asym does not support --stat studentized (resampling methods only)")
    if args.data:
        if args.x or args.y:
            raise UsageError("give either --data or --x/--y, not both")
        _, data = read_value_group(args.data, args.x_label)
    elif args.x and args.y:
        data = TwoSample(read_column(args.x), read_column(args.y))
    else:
        raise UsageError("need --data FILE or both --x FILE and --y FILE")
    seed = args.seed if args.seed is not None else default_master_seed()
    rows = _test_rows(data, kind, methods, args, seed)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TEST_HEADER)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in TEST_HEADER])
    return 0


# -- batch ---------------------------------------------------------------------


@dataclass(frozen=True)
class BatchConfig:
    matrix: str
    labels: str
    kind: StatisticKind
    screen_b: int = 1000
    threshold: float = 1e-3
    b_pred: int = 1000
    master_seed: int = 0
    workers: int = 1
    filter_floor: float = None
    filter_frac: float = 0.5
    x_label: str = None

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise UsageError("--threshold must lie in (0, 1]")
        if self.screen_b < 1 or self.b_pred < 2:
            raise UsageError("--screen-b must be >= 1 and --b-pred >= 2")
        if not 0 < self.filter_frac <= 1:
            raise UsageError("--filter-frac must lie in (0, 1]")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")


def read_labels(path):
    labels = {}
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty label file")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected sample_id,group")
            sid = row[0].strip()
            if sid in labels:
                raise DataError(f"{path}:{lineno}: duplicate sample id {sid!r}")
            labels[sid] = row[1].strip()
    return labels


def read_matrix(path):
    """Feature ids, sample ids and a float matrix (features x samples)."""
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DataError(f"{path}: header must list a feature column and sample ids")
        samples = [h.strip() for h in header[1:]]
        if len(set(samples)) != len(samples):
            raise DataError(f"{path}: duplicate sample ids in header")
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            cells = []
            for c in row[1:]:
                if c.strip() == "" or c.strip().upper() in ("NA", "NAN"):
                    raise DataError(f"{path}:{lineno}: missing value for feature {row[0]!r}")
                cells.append(_float_cell(c.strip(), path, lineno))
            ids.append(row[0].strip())
            rows.append(cells)
    if not rows:
        raise DataError(f"{path}: no features")
    return ids, samples, np.array(rows)


def _split_columns(samples, labels, x_label, source):
    missing = [s for s in samples if s not in labels]
    if missing:
        raise DataError(f"{source}: samples without a group label: {missing[:5]}")
    groups = {}
    for i, s in enumerate(samples):
        groups.setdefault(labels[s], []).append(i)
    names = list(groups)
    if len(names) != 2:
        raise DataError(f"expected exactly two groups among the samples, found {names}")
    if x_label is not None:
        if x_label not in groups:
            raise DataError(f"group label {x_label!r} not present")
        names.sort(key=lambda g: g != x_label)
    return np.array(groups[names[0]]), np.array(groups[names[1]])


def _batch_feature(job):
    index, fid, x, y, cfg = job
    data = TwoSample(x, y)
    kind = cfg.kind
    fold = data.mean_x / data.mean_y if data.mean_y != 0 else math.nan
    base = {"feature_id": fid, "n_x": data.n_x, "n_y": data.n_y, "statistic": kind.value, "fold_change": fold}
    try:
        screen_seed = derive_seed(cfg.master_seed, index, "screen")
        screen = p_simple_mc(data, kind, cfg.screen_b, seed=screen_seed)
        if screen.p > cfg.threshold:
            return {**base, "method": "screen", "log10_p": screen.log10_p, "status": "screened",
                    "iterations": cfg.screen_b, "seed": screen_seed}
        refine_seed = derive_seed(cfg.master_seed, index, "refine")
        r = p_pred(data, kind, cfg.b_pred, seed=refine_seed)
    except DataError as exc:
        raise DataError(f"feature {fid!r}: {exc}") from None
    return {
        **base, "method": "refined", "log10_p": r.log10_p, "status": r.status,
        "m_stop": r.m_stop, "iterations": cfg.screen_b + r.total_iterations,
        "deviance": r.fit.deviance if r.fit else None, "aic": r.fit.aic if r.fit else None,
        "seed": refine_seed,
    }


def run_batch(cfg):
    ids, samples, values = read_matrix(cfg.matrix)
    labels = read_labels(cfg.labels)
    ix, iy = _split_columns(samples, labels, cfg.x_label, cfg.matrix)
    jobs = []
    for i, fid in enumerate(ids):
        row = values[i]
        if cfg.filter_floor is not None and np.mean(row > cfg.filter_floor) < cfg.filter_frac:
            continue
        jobs.append((i, fid, row[ix], row[iy], cfg))
    if not jobs:
        raise DataError("every feature was removed by the expression filter")
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_batch_feature, jobs, chunksize=max(1, len(jobs) // (8 * cfg.workers))))
    return [_batch_feature(j) for j in jobs]


def cmd_batch(args, out):
    cfg = BatchConfig(
        matrix=args.matrix, labels=args.labels, kind=StatisticKind.parse(args.stat),
        screen_b=args.screen_b, threshold=args.threshold, b_pred=args.b_pred,
        master_seed=args.seed if args.seed is not None else default_master_seed(),
        workers=args.workers, filter_floor=args.filter_floor, filter_frac=args.filter_frac,
        x_label=args.x_label,
    )
    rows = run_batch(cfg)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(BATCH_HEADER)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in BATCH_HEADER])
    return 0


# -- plan ----------------------------------------------------------------------


def cmd_plan(args, out):
    kind = StatisticKind.parse(args.stat)
    if kind is StatisticKind.STUDENTIZED:
        raise UnsupportedError("planning needs a closed-form statistic; studentized is not supported")
    if args.x or args.y:
        if not (args.x and args.y):
            raise UsageError("give both --x and --y")
        summary = TwoSample(read_column(args.x), read_column(args.y)).summary()
        template = summary
    else:
        need = {"--mean-x": args.mean_x, "--mean-y": args.mean_y, "--var-x": args.var_x, "--var-y": args.var_y}
        absent = [k for k, v in need.items() if v is None]
        if absent:
            raise UsageError(f"missing {', '.join(absent)} (or give --x/--y data files)")
        template = SummaryPair(2, 2, args.mean_x, args.mean_y, args.var_x, args.var_y)
        n_x = args.n_x if args.n_x is not None else args.n
        n_y = args.n_y if args.n_y is not None else args.n
        summary = template.with_sizes(n_x, n_y) if n_x and n_y else None
    lines = [("statistic", kind.value), ("t", statistic_from_summary(template, kind))]
    if summary is not None:
        ms = m_stop_asym(summary, kind, b_pred=args.b_pred)
        lines += [
            ("n_x", summary.n_x), ("n_y", summary.n_y), ("m_stop_asym", ms),
            ("predicted_iterations", ms * args.b_pred),
            ("log10_p_asym", p_asym(summary, kind).log10_p),
        ]
    lines += [("c", args.c), ("n_hat", n_hat(template, kind, args.b_pred, args.c))]
    for k, v in lines:
        out.write(f"{k}={_fmt(v)}\n")
    return 0


# -- simulate ------------------------------------------------------------------


def _scenario_text(path):
    if os.path.exists(path):
        with _open_text(path) as fh:
            return fh.read()
    bundled = importlib.resources.files("fastperm").joinpath("scenarios", os.path.basename(path))
    if bundled.is_file():
        return bundled.read_text(encoding="utf-8")
    raise DataError(f"scenario file {path} not found")


def cmd_simulate(args, out):
    rows = []
    for path in args.scenarios:
        text = _scenario_text(path)
        if not any(line.split("#", 1)[0].strip() for line in text.splitlines()):
            raise UsageError(f"scenario file {path} is empty")
        for s in parse_scenarios(text):
            s = with_overrides(s, replicates=args.replicates, seed=args.seed, b_pred=args.b_pred)
            rows.extend(run_scenario(s, workers=args.workers))
    write_csv(rows, out)
    return 0


# -- argument parsing ----------------------------------------------------------


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="fastperm", description="Small permutation p-values via partition decomposition.")
    p.add_argument("--version", action="version", version=f"fastperm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--stat", choices=[k.value for k in StatisticKind], default="abs-diff")
        sp.add_argument("--b-pred", type=_positive_int, default=1000, help="draws per partition (default 1000)")
        sp.add_argument("--seed", type=_seed, default=None, help="master seed (default $FASTPERM_SEED)")
        sp.add_argument("--out", default="-", help="output file (default stdout)")

    t = sub.add_parser("test", help="p-values for one dataset")
    common(t)
    t.add_argument("--x", help="one-column file with group x")
    t.add_argument("--y", help="one-column file with group y")
    t.add_argument("--data", help="value,group CSV with a header")
    t.add_argument("--x-label", help="group label to treat as x when using --data")
    t.add_argument("--method", default="alg1", help=f"comma list from {','.join(TEST_METHODS)}")
    t.add_argument("--b", type=_positive_int, default=10_000, help="draws for simple_mc")
    t.add_argument("--alpha", type=float, default=1.0, help="gamma shape for beta_prime")
    t.add_argument("--reflection", choices=["exact", "published"], default="exact")
    t.set_defaults(func=cmd_test)

    b = sub.add_parser("batch", help="screen-then-refine over a matrix")
    common(b)
    b.add_argument("matrix", help="CSV: feature id column, then one column per sample")
    b.add_argument("labels", help="CSV: sample_id,group")
    b.add_argument("--x-label", help="group label to treat as x")
    b.add_argument("--screen-b", type=_positive_int, default=1000)
    b.add_argument("--threshold", type=float, default=1e-3, help="refine when screened p <= threshold")
    b.add_argument("--workers", type=_positive_int, default=1)
    b.add_argument("--filter-floor", type=float, default=None, help="expression floor for the filter")
    b.add_argument("--filter-frac", type=float, default=0.5, help="minimum fraction of samples above the floor")
    b.set_defaults(func=cmd_batch)

    pl = sub.add_parser("plan", help="m_stop and sample-size planning")
    common(pl)
    for name in ("mean-x", "mean-y", "var-x", "var-y"):
        pl.add_argument(f"--{name}", type=float)
    pl.add_argument("--n", type=_positive_int, help="common group size")
    pl.add_argument("--n-x", type=_positive_int)
    pl.add_argument("--n-y", type=_positive_int)
    pl.add_argument("--x", help="one-column data file for group x")
    pl.add_argument("--y", help="one-column data file for group y")
    pl.add_argument("--c", type=_positive_int, default=4, help="target m_stop for n_hat (default 4)")
    pl.set_defaults(func=cmd_plan)

    s = sub.add_parser("simulate", help="run scenario files")
    common(s)
    s.add_argument("scenarios", nargs="+", help="scenario files (bundled names such as table_s1.scn also work)")
    s.add_argument("--replicates", type=_positive_int, default=None, help="override replicate count")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "b_pred", 2) < 2:
        parser.error("--b-pred must be at least 2")
    try:
        if args.out == "-":
            return args.func(args, sys.stdout)
        # Write to a buffer first so a failure leaves no partial file.
        buf = io.StringIO()
        code = args.func(args, buf)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        return code
    except (UsageError, UnsupportedError, DomainError) as exc:
        print(f"fastperm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"fastperm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"fastperm: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
