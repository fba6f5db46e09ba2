"""Monte Carlo success fractions of l1-AMP recovery over a (delta, rho) grid."""

from __future__ import annotations

import csv
import zlib
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from ..cs_amp import SolverParams, make_problem, result_row, solve_l1
from ..ensembles import EnsembleSpec
from ..errors import ParameterError
from .config import ExperimentConfig
from .stats import wilson_interval


def ensemble_key(spec: EnsembleSpec) -> int:
    """Stable integer identifying an ensemble in seed tuples."""
    return zlib.crc32(spec.tag.encode())


def trial_seed(master: int, spec: EnsembleSpec, delta: float, rho: float, trial: int) -> tuple:
    """Seed tuple of one trial; depends only on the trial's own coordinates."""
    return (int(master), ensemble_key(spec), int(round(delta * 1e9)), int(round(rho * 1e9)), int(trial))


@dataclass(frozen=True)
class Trial:
    seed: tuple
    n: int
    delta: float
    rho: float
    ensemble: EnsembleSpec
    solver: SolverParams
    support: str
    nonzero_law: str


def run_trial(task: Trial) -> dict:
    problem = make_problem(task.n, task.delta, task.rho, task.seed, task.ensemble,
                           task.nonzero_law, task.support)
    res = solve_l1(problem, task.solver)
    row = result_row(task.seed, task.n, task.delta, task.rho, task.ensemble, res)
    row["diverged"] = int(res.diverged)
    return row


def run_trials(tasks: Sequence[Trial], threads: int = 1) -> list[dict]:
    """Results in task order regardless of the worker count."""
    if threads <= 1 or len(tasks) < 2:
        return [run_trial(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_trial, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


@dataclass(frozen=True)
class PhasePoint:
    delta: float
    rho: float
    ensemble: str
    n: int
    trials: int
    successes: int
    diverged: int
    wilson_lo: float
    wilson_hi: float
    master_seed: int

    @property
    def success_fraction(self) -> float:
        return self.successes / self.trials

    def row(self) -> dict:
        return {"delta": repr(self.delta), "rho": repr(self.rho), "ensemble": self.ensemble, "n": self.n,
                "trials": self.trials, "successes": self.successes,
                "success_fraction": repr(self.success_fraction), "wilson_lo": repr(self.wilson_lo),
                "wilson_hi": repr(self.wilson_hi), "diverged": self.diverged, "master_seed": self.master_seed}


PHASE_FIELDS = ("delta", "rho", "ensemble", "n", "trials", "successes", "success_fraction",
                "wilson_lo", "wilson_hi", "diverged", "master_seed")
TRIAL_FIELDS = ("seed", "n", "delta", "rho", "ensemble", "alpha", "iterations", "rel_error", "success", "diverged")


def summarize(rows: Iterable[dict], delta: float, rho: float, spec: EnsembleSpec, n: int, master: int) -> PhasePoint:
    rows = list(rows)
    k = sum(int(r["success"]) for r in rows)
    lo, hi = wilson_interval(k, len(rows))
    return PhasePoint(delta, rho, spec.tag, n, len(rows), k, sum(int(r["diverged"]) for r in rows), lo, hi, master)


def run_point(cfg: ExperimentConfig, delta: float, rho: float, spec: EnsembleSpec, trials: int,
              threads: int = 1) -> tuple[PhasePoint, list[dict]]:
    tasks = [Trial(trial_seed(cfg.master_seed, spec, delta, rho, k), cfg.n, delta, rho, spec, cfg.solver,
                   cfg.support, cfg.nonzero_law) for k in range(trials)]
    rows = run_trials(tasks, threads)
    return summarize(rows, delta, rho, spec, cfg.n, cfg.master_seed), rows


def run_phase_diagram(cfg: ExperimentConfig, threads: int = 1) -> tuple[list[PhasePoint], list[dict]]:
    """All grid points for all ensembles, sorted by (ensemble, delta, rho)."""
    if not cfg.grid:
        raise ParameterError("phase diagram needs a nonempty grid")
    tasks, keys = [], []
    for spec in cfg.ensembles:
        for delta, rho in cfg.grid:
            for k in range(cfg.trials):
                tasks.append(Trial(trial_seed(cfg.master_seed, spec, delta, rho, k), cfg.n, delta, rho, spec,
                                   cfg.solver, cfg.support, cfg.nonzero_law))
                keys.append((spec.tag, delta, rho, k))
    rows = run_trials(tasks, threads)
    order = sorted(range(len(rows)), key=lambda i: keys[i])
    rows = [rows[i] for i in order]
    keys = [keys[i] for i in order]
    points = []
    specs = {s.tag: s for s in cfg.ensembles}
    start = 0
    while start < len(rows):
        tag, delta, rho, _ = keys[start]
        stop = start
        while stop < len(rows) and keys[stop][:3] == (tag, delta, rho):
            stop += 1
        points.append(summarize(rows[start:stop], delta, rho, specs[tag], cfg.n, cfg.master_seed))
        start = stop
    return points, rows


def write_csv(path, fieldnames: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
