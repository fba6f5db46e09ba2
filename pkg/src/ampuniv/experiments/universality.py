"""Moment gaps of symmetric AMP iterates across matrix ensembles.

Runs Wigner AMP with a separable polynomial ``f`` on many independent
matrices per ensemble (batched), and compares trial averages of
``(1/N) sum_i (x^t_i)^p`` between every ensemble and the first one.
The initial condition of trial ``k`` is shared across ensembles so that the
comparison only sees the matrix law.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..ensembles import EnsembleSpec, Normalization, VarianceProfile, make_rng, sample_symmetric
from .config import UniversalityConfig
from .phase_diagram import ensemble_key

UNIVERSALITY_FIELDS = ("N", "t", "degree", "ensemble_a", "ensemble_b", "mean_a", "mean_b", "gap", "se", "z",
                       "flagged", "trials", "master_seed")


def _symmetric_spec(spec: EnsembleSpec) -> EnsembleSpec:
    if spec.normalization is Normalization.VAR_ONE_OVER_M:
        return replace(spec, normalization=Normalization.VAR_ONE_OVER_N)
    return spec


def batched_orbit_moments(As: np.ndarray, x0: np.ndarray, coeffs, T: int, max_degree: int) -> np.ndarray:
    """``out[b, t-1, p-1] = mean_i (x^t_i)^p`` for a batch of matrices ``As[b]``."""
    c = np.asarray(coeffs, dtype=float)
    dc = np.polynomial.polynomial.polyder(c)
    A2 = As * As
    x_prev_f = np.zeros_like(x0)
    x = x0
    out = np.empty((As.shape[0], T, max_degree))
    for t in range(T):
        fx = np.polynomial.polynomial.polyval(x, c)
        new = np.einsum("bij,bj->bi", As, fx)
        if t > 0:
            b = np.einsum("bij,bj->bi", A2, np.polynomial.polynomial.polyval(x, dc))
            new -= b * x_prev_f
        x_prev_f, x = fx, new
        for p in range(1, max_degree + 1):
            out[:, t, p - 1] = np.mean(x ** p, axis=1)
    return out


def ensemble_moments(spec: EnsembleSpec, N: int, cfg: UniversalityConfig, master: int) -> np.ndarray:
    """Per-trial moments, shape ``(trials, T, max_degree)``."""
    spec = _symmetric_spec(spec)
    profile = VarianceProfile.wigner()
    key = ensemble_key(spec)
    res = []
    for start in range(0, cfg.trials, cfg.chunk):
        ks = range(start, min(start + cfg.chunk, cfg.trials))
        As = np.stack([sample_symmetric(profile, spec, N, (master, key, N, k)) for k in ks])
        x0 = np.stack([cfg.x0_mean + cfg.x0_std * make_rng((master, 0, N, k)).standard_normal(N) for k in ks])
        res.append(batched_orbit_moments(As, x0, cfg.coeffs, cfg.T, cfg.max_degree))
    return np.concatenate(res)


def universality_report(ensembles, cfg: UniversalityConfig, master: int = 0) -> list[dict]:
    """Gap rows for every size, time, degree and ensemble against ``ensembles[0]``."""
    rows = []
    for N in cfg.sizes:
        moms = [ensemble_moments(e, N, cfg, master) for e in ensembles]
        ref = moms[0]
        for e, mom in zip(ensembles[1:], moms[1:]):
            for t in range(cfg.T):
                for p in range(cfg.max_degree):
                    a, b = ref[:, t, p], mom[:, t, p]
                    gap = float(b.mean() - a.mean())
                    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
                    z = gap / se if se > 0 else (0.0 if gap == 0 else math.inf)
                    rows.append({"N": N, "t": t + 1, "degree": p + 1, "ensemble_a": ensembles[0].tag,
                                 "ensemble_b": e.tag, "mean_a": repr(float(a.mean())),
                                 "mean_b": repr(float(b.mean())), "gap": repr(gap), "se": repr(se),
                                 "z": repr(z), "flagged": int(abs(z) > 4), "trials": cfg.trials,
                                 "master_seed": master})
    return rows


SHRINK_FIELDS = ("t", "degree", "ensemble_b", "N_small", "N_large", "gap_small", "se_small", "gap_large",
                 "se_large", "shrinks", "z_difference")


def shrink_rows(rows: list[dict], t: int = 2, degree: int = 2) -> list[dict]:
    """Compare ``|gap|`` between the smallest and largest size for one (t, degree)."""
    pick = [r for r in rows if r["t"] == t and r["degree"] == degree]
    out = []
    for tag in sorted({r["ensemble_b"] for r in pick}):
        by_n = {r["N"]: r for r in pick if r["ensemble_b"] == tag}
        lo, hi = by_n[min(by_n)], by_n[max(by_n)]
        gs, ss = abs(float(lo["gap"])), float(lo["se"])
        gl, sl = abs(float(hi["gap"])), float(hi["se"])
        comb = math.hypot(ss, sl)
        out.append({"t": t, "degree": degree, "ensemble_b": tag, "N_small": lo["N"], "N_large": hi["N"],
                    "gap_small": repr(gs), "se_small": repr(ss), "gap_large": repr(gl), "se_large": repr(sl),
                    "shrinks": int(gl <= gs), "z_difference": repr((gs - gl) / comb if comb > 0 else 0.0)})
    return out
