"""Locating the 50% success crossing in rho at fixed delta."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..cs_amp import SolverParams
from ..ensembles import GAUSSIAN, EnsembleSpec
from ..errors import ParameterError
from .config import ExperimentConfig, ThresholdConfig
from .phase_diagram import PhasePoint, run_point
from .stats import Z95, probit_crossing


@dataclass
class ThresholdEstimate:
    delta: float
    ensemble: str
    n: int
    rho_hat: float
    ci: tuple[float, float]
    bracket: tuple[float, float]
    method: str                      # "probit" or "bisection"
    flagged: bool
    probes: list = field(default_factory=list)

    @property
    def bracket_width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def row(self) -> dict:
        return {"delta": repr(self.delta), "ensemble": self.ensemble, "n": self.n, "rho_hat": repr(self.rho_hat),
                "ci_lo": repr(self.ci[0]), "ci_hi": repr(self.ci[1]), "bracket_lo": repr(self.bracket[0]),
                "bracket_hi": repr(self.bracket[1]), "method": self.method, "flagged": int(self.flagged)}


THRESHOLD_FIELDS = ("delta", "ensemble", "n", "rho_hat", "ci_lo", "ci_hi", "bracket_lo", "bracket_hi",
                    "method", "flagged")


def non_monotone(points: list[PhasePoint]) -> bool:
    """True if some smaller rho is significantly less successful than a larger one."""
    pts = sorted(points, key=lambda p: p.rho)
    return any(a.wilson_hi < b.wilson_lo for i, a in enumerate(pts) for b in pts[i + 1:])


def estimate_threshold(delta: float, ensemble: EnsembleSpec = GAUSSIAN, n: int = 2000,
                       trials_per_probe: int = 40, probes: int = 8, master_seed: int = 0,
                       solver: SolverParams | None = None, support: str = "exact",
                       nonzero_law: str = "unit_gaussian", rho_lo: float = 0.0, rho_hi: float = 1.0,
                       threads: int = 1) -> ThresholdEstimate:
    """Bisection on rho, then a probit fit through every probe.

    The probit 50% point is reported when the fit converges and lands inside
    the probed range; otherwise the final bisection midpoint is used.
    """
    tcfg = ThresholdConfig(probes, trials_per_probe, rho_lo, rho_hi)   # validates
    if not (0 < delta < 1):
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    cfg = ExperimentConfig(master_seed=master_seed, n=n, trials=trials_per_probe, ensembles=(ensemble,),
                           solver=solver or SolverParams(max_iter=1000), support=support,
                           nonzero_law=nonzero_law)
    lo, hi = tcfg.rho_lo, tcfg.rho_hi
    points: list[PhasePoint] = []
    for _ in range(tcfg.probes):
        mid = 0.5 * (lo + hi)
        point, _ = run_point(cfg, delta, mid, ensemble, trials_per_probe, threads)
        points.append(point)
        if point.success_fraction >= 0.5:
            lo = mid
        else:
            hi = mid
    flagged = non_monotone(points)
    fit = probit_crossing([p.rho for p in points], [p.successes for p in points], [p.trials for p in points])
    probed = [p.rho for p in points]
    if fit.converged and min(probed) <= fit.center <= max(probed) and math.isfinite(fit.se):
        rho_hat, method = fit.center, "probit"
        ci = (fit.center - Z95 * fit.se, fit.center + Z95 * fit.se)
    else:
        rho_hat, method, ci = 0.5 * (lo + hi), "bisection", (lo, hi)
    return ThresholdEstimate(delta, ensemble.tag, n, rho_hat, ci, (lo, hi), method, flagged,
                             [p.row() for p in points])
