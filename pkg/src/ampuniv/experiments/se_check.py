"""Empirical AMP statistics against their state evolution predictions.

Two families of checks, each reported as ``(empirical mean, standard error,
prediction, z)`` over independent trials:

* l1-AMP on i.i.d. sparse signals: the per-iteration MSE
  ``(1/n)||x^t - x0||^2`` against ``delta sigma_t^2``, the Onsager
  coefficient ``||x^t||_0 / m`` against ``(1/delta) P(|X + sigma_{t-1} Z| >
  alpha sigma_{t-1})``, and ``(1/n) sum_i (u^t_i - u^s_i)^2`` against
  ``R[t,t] - 2 R[t,s] + R[s,s]`` from the two-time table.
* Symmetric Wigner AMP with ``f`` the identity, whose state evolution is
  constant: ``(1/N) sum_i (x^t_i)^2`` against ``E x0^2``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..amp_symmetric import AmpInstance, OrbitState, amp_step
from ..cs_amp import CsAmpState, cs_amp_step, make_problem, se_sigmas, two_time_table
from ..ensembles import GAUSSIAN, EnsembleSpec, Normalization, SignalSpec, VarianceProfile, make_rng, sample_symmetric
from ..functions import PolyMap, identity
from ..phase_boundary import alpha_star
from ..scalar_se import prob_above
from ..state_evolution import ConvergingModel, se_run
from .config import SeCheckConfig
from .phase_diagram import ensemble_key

SE_CHECK_FIELDS = ("check", "statistic", "t", "s", "empirical", "se", "prediction", "z", "flagged", "trials",
                   "master_seed")
SE_TRIAL_FIELDS = ("seed", "check", "statistic", "t", "s", "value")


@dataclass(frozen=True)
class _L1Task:
    seed: tuple
    n: int
    delta: float
    epsilon: float
    alpha: float
    T: int
    sigmas: tuple | None
    ensemble: EnsembleSpec


def _l1_trial(task: _L1Task) -> dict:
    """Statistics of one l1-AMP run keyed by ``(statistic, t, s)``."""
    rho = task.epsilon / task.delta
    prob = make_problem(task.n, task.delta, rho, task.seed, task.ensemble, support="iid")
    state = CsAmpState.initial(prob)
    us = []
    out = {}
    for t in range(task.T):
        sigma = None if task.sigmas is None else task.sigmas[t]
        state = cs_amp_step(prob, state, task.alpha, sigma)
        us.append(state.u)
        out[("mse", t + 1, "")] = float(np.mean((state.x - prob.x0) ** 2))
        out[("b", t + 1, "")] = state.nnz / prob.m
    for t in range(task.T):
        for s in range(t):
            out[("u_diff", t, s)] = float(np.mean((us[t] - us[s]) ** 2))
    return out


def _map(fn, tasks, threads):
    if threads <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


def _aggregate(check: str, per_trial: list[dict], predictions: dict, master: int) -> list[dict]:
    rows = []
    for key in sorted(predictions, key=lambda k: (k[0], k[1], str(k[2]))):
        vals = np.array([d[key] for d in per_trial])
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(vals.size))
        pred = float(predictions[key])
        diff = mean - pred
        z = diff / se if se > 0 else (0.0 if abs(diff) < 1e-12 else math.inf)
        rows.append({"check": check, "statistic": key[0], "t": key[1], "s": key[2], "empirical": repr(mean),
                     "se": repr(se), "prediction": repr(pred), "z": repr(z), "flagged": int(abs(z) > 4),
                     "trials": vals.size, "master_seed": master})
    return rows


def _trial_rows(check: str, seeds, per_trial: list[dict]) -> list[dict]:
    rows = []
    for seed, d in zip(seeds, per_trial):
        txt = "-".join(map(str, seed))
        for (name, t, s), v in sorted(d.items(), key=lambda kv: (kv[0][0], kv[0][1], str(kv[0][2]))):
            rows.append({"seed": txt, "check": check, "statistic": name, "t": t, "s": s, "value": repr(float(v))})
    return rows


def l1_check(cfg: SeCheckConfig, master: int = 0, ensemble: EnsembleSpec = GAUSSIAN,
             threads: int = 1) -> tuple[list[dict], list[dict]]:
    """Aggregate and per-trial rows of the l1-AMP tracking check."""
    delta, eps, T = cfg.delta, cfg.epsilon, cfg.T
    alpha = alpha_star(eps) if cfg.alpha is None else cfg.alpha
    signal = SignalSpec(eps, "unit_gaussian")
    comps = signal.components()
    sig2 = se_sigmas(alpha, delta, signal, T) ** 2
    R = two_time_table(alpha, delta, signal, T)
    preds = {}
    for t in range(1, T + 1):
        preds[("mse", t, "")] = delta * sig2[t]
        s_prev = math.sqrt(sig2[t - 1])
        preds[("b", t, "")] = prob_above(s_prev ** 2, alpha * s_prev, comps) / delta
    for t in range(T):
        for s in range(t):
            preds[("u_diff", t, s)] = R[t, t] - 2 * R[t, s] + R[s, s]
    sigmas = None if cfg.schedule == "empirical" else tuple(float(v) for v in np.sqrt(sig2))
    key = ensemble_key(ensemble)
    seeds = [(master, key, int(round(delta * 1e9)), int(round(eps * 1e9)), cfg.n, k) for k in range(cfg.trials)]
    tasks = [_L1Task(s, cfg.n, delta, eps, alpha, T, sigmas, ensemble) for s in seeds]
    per_trial = _map(_l1_trial, tasks, threads)
    return _aggregate("l1", per_trial, preds, master), _trial_rows("l1", seeds, per_trial)


def _identity_trial(args) -> dict:
    seed, N, T = args
    spec = EnsembleSpec(GAUSSIAN.kind, normalization=Normalization.VAR_ONE_OVER_N)
    A = sample_symmetric(VarianceProfile.wigner(), spec, N, seed + (0,))
    x0 = 1.0 + make_rng(seed + (1,)).standard_normal(N)
    inst = AmpInstance(A, identity(), x0, check=False)
    state = OrbitState.initial(inst)
    out = {}
    for _ in range(T):
        state = amp_step(inst, state)
        out[("m2", state.t, "")] = float(np.mean(state.x_curr[:, 0] ** 2))
    return out


def identity_check(cfg: SeCheckConfig, master: int = 0, threads: int = 1) -> tuple[list[dict], list[dict]]:
    """Wigner AMP with ``f(x) = x`` and ``x0 ~ N(1, 1)``: the second moment stays at ``E x0^2 = 2``."""
    model = ConvergingModel(np.eye(1), np.ones(1), lambda a, t: PolyMap.univariate([0.0, 1.0]), 1, (2.0,))
    traj = se_run(model, cfg.T)
    preds = {("m2", t, ""): float(traj[t].Sigma[0][0, 0]) for t in range(1, cfg.T + 1)}
    seeds = [(master, 1, cfg.symmetric_N, k) for k in range(cfg.trials)]
    per_trial = _map(_identity_trial, [(s, cfg.symmetric_N, cfg.T) for s in seeds], threads)
    return _aggregate("identity", per_trial, preds, master), _trial_rows("identity", seeds, per_trial)


def se_vs_empirical_report(cfg: SeCheckConfig, master: int = 0, ensemble: EnsembleSpec = GAUSSIAN,
                           threads: int = 1) -> tuple[list[dict], list[dict]]:
    """Both checks; returns ``(aggregate rows, per-trial rows)``."""
    agg1, tr1 = l1_check(cfg, master, ensemble, threads)
    agg2, tr2 = identity_check(cfg, master, threads)
    return agg1 + agg2, tr1 + tr2
