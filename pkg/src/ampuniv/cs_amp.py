"""Soft-thresholding AMP for l1 recovery of sparse vectors from ``y = A x0``.

    z^t     = y - A x^t + b_t z^{t-1}
    u^t     = x^t + A^T z^t
    x^{t+1} = eta(u^t; alpha sigma_t)

with ``x^0 = 0``, ``z^{-1} = 0`` and ``b_t = ||x^t||_0 / m`` (the row-averaged
Onsager coefficient). ``sigma_t`` comes either from the residual,
``||z^t||^2 / m`` (``schedule="empirical"``, the default), or from the
scalar state evolution (``schedule="se"``). The second is an open-loop
schedule: at finite ``n`` a trajectory that falls behind its prediction gets
thresholds that are too small and is then driven away from it, so it is kept
for comparison only.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from . import scalar_se
from .ensembles import EnsembleSpec, GAUSSIAN, Seed, SignalSpec, make_rng, sample_rectangular, sample_signal
from .errors import DivergenceError, ParameterError, ShapeError
from .phase_boundary import alpha_star
from .scalar_se import soft_threshold

__all__ = [
    "CsProblem", "CsAmpState", "SolverParams", "SolveResult", "ScalarSeTrajectory",
    "soft_threshold", "make_problem", "cs_amp_step", "scalar_se_step", "se_sigmas",
    "two_time_table", "scalar_se_trajectory", "solve_l1", "RESULT_FIELDS", "write_results",
]


@dataclass(frozen=True, eq=False)
class CsProblem:
    A: np.ndarray
    x0: np.ndarray
    y: np.ndarray
    signal: SignalSpec

    def __post_init__(self):
        m, n = self.A.shape
        if self.x0.shape != (n,) or self.y.shape != (m,):
            raise ShapeError(f"A is {m}x{n}, x0 {self.x0.shape}, y {self.y.shape}")
        if not (0 < m < n):
            raise ParameterError(f"need 0 < m < n, got m={m}, n={n}")

    @classmethod
    def from_matrix(cls, A, x0, signal: SignalSpec) -> CsProblem:
        A = np.asarray(A, dtype=float)
        x0 = np.asarray(x0, dtype=float)
        return cls(A, x0, A @ x0, signal)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def delta(self) -> float:
        return self.m / self.n


def make_problem(n: int, delta: float, rho: float, seed: Seed, ensemble: EnsembleSpec = GAUSSIAN,
                 nonzero_law: str = "unit_gaussian", support: str = "iid") -> CsProblem:
    """Random instance with ``m = round(delta n)`` rows and sparsity ``epsilon = rho delta``.

    ``support="iid"`` draws each entry nonzero independently with probability
    ``epsilon``; ``support="exact"`` places exactly ``round(rho m)`` nonzeros.
    ``seed`` may be a tuple; the matrix and the signal use disjoint sub-streams.
    """
    if not (0 < delta < 1) or not (0 <= rho <= 1):
        raise ParameterError(f"need delta in (0,1) and rho in [0,1], got {delta}, {rho}")
    m = int(round(delta * n))
    signal = SignalSpec(rho * m / n, nonzero_law)
    base = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    A = sample_rectangular(ensemble, m, n, base + (0,))
    if support == "iid":
        x0 = sample_signal(signal, n, base + (1,))
    elif support == "exact":
        rng = make_rng(base + (1,))
        k = int(round(rho * m))
        x0 = np.zeros(n)
        idx = rng.choice(n, size=k, replace=False)
        full = sample_signal(SignalSpec(1.0, nonzero_law), k, base + (2,))
        x0[np.sort(idx)] = full
    else:
        raise ParameterError(f"support must be 'iid' or 'exact', got {support!r}")
    return CsProblem.from_matrix(A, x0, signal)


def scalar_se_step(sigma_sq: float, alpha: float, delta: float, signal: SignalSpec) -> float:
    """``sigma^2 -> (1/delta) E [eta(X + sigma Z; alpha sigma) - X]^2``."""
    return scalar_se.se_map(sigma_sq, alpha, delta, signal.components())


def se_sigmas(alpha: float, delta: float, signal: SignalSpec, T: int) -> np.ndarray:
    """``sigma_t`` (not squared) for ``t = 0..T``."""
    return np.sqrt(scalar_se.se_trajectory(alpha, delta, signal.components(), T))


def two_time_table(alpha: float, delta: float, signal: SignalSpec, T: int) -> np.ndarray:
    return scalar_se.two_time_table(alpha, delta, signal.components(), T)


@dataclass(frozen=True)
class ScalarSeTrajectory:
    sigma_sq: np.ndarray
    R: np.ndarray | None = None


def scalar_se_trajectory(alpha: float, delta: float, signal: SignalSpec, T: int,
                         two_time: bool = False) -> ScalarSeTrajectory:
    comps = signal.components()
    sig = scalar_se.se_trajectory(alpha, delta, comps, T)
    return ScalarSeTrajectory(sig, scalar_se.two_time_table(alpha, delta, comps, T) if two_time else None)


@dataclass(frozen=True)
class CsAmpState:
    """Iterate ``x^t`` with the previous residual ``z^{t-1}``.

    After a step, ``z`` and ``u`` hold ``z^{t-1}`` and ``u^{t-1}`` of the new
    state (i.e. the quantities that produced ``x^t``), ``sigma`` the scale
    used for that threshold and ``b`` the Onsager coefficient (averaged form).
    """

    t: int
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray | None = None
    sigma: float = float("nan")
    b: float = 0.0

    @classmethod
    def initial(cls, problem: CsProblem) -> CsAmpState:
        return cls(0, np.zeros(problem.n), np.zeros(problem.m))

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.x))


def cs_amp_step(problem: CsProblem, state: CsAmpState, alpha: float, sigma: float | None = None,
                onsager: str = "averaged") -> CsAmpState:
    """One iteration ``x^t -> x^{t+1}``.

    ``sigma`` is ``sigma_t``; when ``None`` the empirical ``||z^t|| / sqrt(m)``
    is used.
    """
    A, m = problem.A, problem.m
    active = state.x != 0
    if state.t == 0:
        z = problem.y - A @ state.x
        b = 0.0
    elif onsager == "averaged":
        b = np.count_nonzero(active) / m
        z = problem.y - A @ state.x + b * state.z
    elif onsager == "rowwise":
        bi = (A[:, active] ** 2).sum(axis=1)
        b = float(bi.mean())
        z = problem.y - A @ state.x + bi * state.z
    else:
        raise ParameterError(f"onsager must be 'averaged' or 'rowwise', got {onsager!r}")
    u = state.x + A.T @ z
    if sigma is None:
        sigma = float(np.linalg.norm(z) / math.sqrt(m))
    x = soft_threshold(u, alpha * sigma)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise DivergenceError(state.t + 1)
    return CsAmpState(state.t + 1, x, z, u, sigma, b)


@dataclass(frozen=True)
class SolverParams:
    alpha: float | None = None      # None: alpha_*(epsilon) of the problem's signal
    max_iter: int = 300
    tol: float = 1e-3
    schedule: str = "empirical"     # "empirical" or "se"
    onsager: str = "averaged"
    stall_window: int = 50
    stall_factor: float = 0.99

    def __post_init__(self):
        if self.max_iter < 1 or self.tol <= 0:
            raise ParameterError("need max_iter >= 1 and tol > 0")
        if self.schedule not in ("se", "empirical"):
            raise ParameterError(f"schedule must be 'se' or 'empirical', got {self.schedule!r}")
        if self.alpha is not None and self.alpha <= 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")

    def resolve_alpha(self, signal: SignalSpec) -> float:
        if self.alpha is not None:
            return self.alpha
        eps = min(max(signal.epsilon, 1e-6), 1 - 1e-6)
        return alpha_star(eps)


@dataclass
class SolveResult:
    x_hat: np.ndarray
    iterations: int
    success: bool
    rel_error: float
    alpha: float
    residual_history: list = field(default_factory=list)
    diverged: bool = False
    stalled: bool = False


def solve_l1(problem: CsProblem, params: SolverParams = SolverParams()) -> SolveResult:
    """Run AMP until the relative error drops below ``tol``, stalls, or ``max_iter``.

    Success means ``||x_hat - x0|| <= tol * max(||x0||, 1)``. The stopping
    test reads the true signal: this is a recovery experiment, not a blind solver.
    """
    alpha = params.resolve_alpha(problem.signal)
    scale = max(float(np.linalg.norm(problem.x0)), 1.0)
    state = CsAmpState.initial(problem)
    err = float(np.linalg.norm(problem.x0)) / scale
    history = [err]
    if err <= params.tol:
        return SolveResult(state.x, 0, True, err, alpha, history)
    sigmas = se_sigmas(alpha, problem.delta, problem.signal, params.max_iter) if params.schedule == "se" else None
    best = err
    since = 0
    stalled = False
    for t in range(params.max_iter):
        sigma = None if sigmas is None else float(sigmas[t])
        try:
            state = cs_amp_step(problem, state, alpha, sigma, params.onsager)
        except DivergenceError:
            return SolveResult(state.x, t + 1, False, math.inf, alpha, history, diverged=True)
        err = float(np.linalg.norm(state.x - problem.x0)) / scale
        history.append(err)
        if err <= params.tol:
            break
        if err < params.stall_factor * best:
            best, since = err, 0
        else:
            since += 1
            if since >= params.stall_window:
                stalled = True
                break
    return SolveResult(state.x, state.t, err <= params.tol, err, alpha, history, stalled=stalled)


RESULT_FIELDS = ("seed", "n", "delta", "rho", "ensemble", "alpha", "iterations", "rel_error", "success")


def result_row(seed, n: int, delta: float, rho: float, ensemble: EnsembleSpec, res: SolveResult) -> dict:
    seed_txt = "-".join(map(str, seed)) if isinstance(seed, (tuple, list)) else str(seed)
    return {"seed": seed_txt, "n": n, "delta": repr(float(delta)), "rho": repr(float(rho)),
            "ensemble": ensemble.tag, "alpha": repr(float(res.alpha)), "iterations": res.iterations,
            "rel_error": repr(float(res.rel_error)), "success": int(res.success)}


def write_results(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        w.writeheader()
        w.writerows(rows)
