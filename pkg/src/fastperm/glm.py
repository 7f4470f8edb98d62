"""Poisson log-linear regression with an intercept and one slope.

Fitted by iteratively reweighted least squares.  This is small enough that a
dedicated implementation is simpler than pulling in a general GLM package,
and it lets the fit report deviance and AIC exactly as the resampler needs.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConvergenceError, DataError

MAX_ITER = 50
REL_TOL = 1e-10
MAX_HALVINGS = 30


@dataclass(frozen=True)
class PoissonFit:
    beta0: float
    beta1: float
    deviance: float
    aic: float
    iterations: int
    converged: bool


def _deviance(y, mu):
    with np.errstate(divide="ignore", invalid="ignore"):
        ylog = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(max(2.0 * np.sum(ylog - (y - mu)), 0.0))


def _loglik(y, eta):
    mu = np.exp(eta)
    lgy = np.array([math.lgamma(v + 1.0) for v in y])
    return float(np.sum(y * eta - mu - lgy))


def fit(m_values, counts):
    """Maximum-likelihood fit of log E[c] = beta0 + beta1 * m."""
    x = np.asarray(m_values, dtype=float).ravel()
    y = np.asarray(counts, dtype=float).ravel()
    if x.size != y.size:
        raise DataError("m_values and counts differ in length")
    if x.size < 2 or np.unique(x).size < 2:
        raise DataError("need at least two distinct predictor values")
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise DataError("counts must be nonnegative integers")
    if not np.any(y > 0):
        raise DataError("all counts are zero")

    X = np.column_stack([np.ones_like(x), x])
    beta = np.linalg.lstsq(X, np.log(y + 0.5), rcond=None)[0]
    eta = X @ beta
    dev = _deviance(y, np.exp(eta))
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        mu = np.exp(eta)
        z = eta + (y - mu) / mu
        sw = np.sqrt(mu)
        step = np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)[0] - beta
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta + scale * step
            cand_eta = X @ cand
            cand_dev = _deviance(y, np.exp(cand_eta))
            if np.isfinite(cand_dev) and cand_dev <= dev * (1 + 1e-12) + 1e-300:
                break
            scale *= 0.5
        change = abs(dev - cand_dev)
        beta, eta, prev, dev = cand, cand_eta, dev, cand_dev
        if change <= REL_TOL * max(prev, 1e-8) or dev < 1e-20:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"IRLS did not converge in {MAX_ITER} iterations",
            last=PoissonFit(float(beta[0]), float(beta[1]), dev, math.nan, it, False),
        )
    aic = -2.0 * _loglik(y, eta) + 4.0
    return PoissonFit(float(beta[0]), float(beta[1]), dev, aic, it, True)


def predict_log_count(fit_, m):
    """Linear predictor beta0 + beta1 * m on the log scale."""
    if np.ndim(m) == 0:
        return fit_.beta0 + fit_.beta1 * float(m)
    return fit_.beta0 + fit_.beta1 * np.asarray(m, dtype=float)
