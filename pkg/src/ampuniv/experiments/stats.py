"""Small statistics helpers: binomial intervals and a probit crossing fit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

Z95 = float(stats.norm.ppf(0.975))


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # clamp so the interval always contains the point estimate despite rounding
    return min(max(center - half, 0.0), p), max(min(center + half, 1.0), p)


@dataclass(frozen=True)
class ProbitFit:
    center: float       # rho at which the fitted success probability is 1/2
    width: float        # probit scale
    se: float           # delta-method standard error of ``center``
    converged: bool


def probit_crossing(x, successes, trials) -> ProbitFit:
    """Fit ``P(success | x) = Phi((c - x) / w)`` by maximum likelihood."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)

    def nll(par):
        c, logw = par
        eta = (c - x) / math.exp(logw)
        lp = stats.norm.logcdf(eta)
        lq = stats.norm.logcdf(-eta)
        return -float(np.sum(k * lp + (n - k) * lq))

    p_hat = k.sum() / n.sum()
    start = np.array([float(np.average(x, weights=n)) if 0 < p_hat < 1 else x.mean(), math.log(0.02)])
    res = optimize.minimize(nll, start, method="Nelder-Mead",
                            options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000})
    c, logw = res.x
    # observed information by central differences
    h = np.array([1e-4, 1e-3])
    H = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            ei, ej = np.eye(2)[i] * h[i], np.eye(2)[j] * h[j]
            H[i, j] = (nll(res.x + ei + ej) - nll(res.x + ei - ej) - nll(res.x - ei + ej)
                       + nll(res.x - ei - ej)) / (4 * h[i] * h[j])
    try:
        cov = np.linalg.inv(H)
        se = math.sqrt(cov[0, 0]) if cov[0, 0] > 0 else math.inf
    except np.linalg.LinAlgError:
        se = math.inf
    ok = bool(res.success) and math.isfinite(se) and np.all(np.isfinite(res.x))
    return ProbitFit(float(c), float(math.exp(logw)), se, ok)
