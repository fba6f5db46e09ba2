"""Experiment configuration read from JSON.

Every section has defaults, so ``{}`` is a valid configuration. Example::

    {
      "master_seed": 7,
      "n": 2000,
      "trials": 50,
      "grid": [[0.5, 0.05], [0.5, 0.95]],
      "deltas": [0.3, 0.5, 0.7],
      "ensembles": ["gaussian", "rademacher", {"kind": "sparse_subgaussian", "params": {"p": 0.3}}],
      "solver": {"max_iter": 1000, "tol": 1e-3, "schedule": "empirical"},
      "threshold": {"probes": 8, "trials_per_probe": 40},
      "universality": {"sizes": [50, 200], "T": 3, "max_degree": 3, "trials": 2000},
      "se_check": {"n": 4000, "delta": 0.5, "epsilon": 0.1, "trials": 200, "T": 10}
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from ..cs_amp import SolverParams
from ..ensembles import GAUSSIAN, EnsembleSpec, parse_ensemble
from ..errors import ParameterError


THRESHOLD_MAX_ITER = 1000


def _ensemble(obj) -> EnsembleSpec:
    if isinstance(obj, EnsembleSpec):
        return obj
    if isinstance(obj, str):
        return parse_ensemble(obj)
    return EnsembleSpec.from_dict(obj)


def _build(cls, data: dict | None):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ParameterError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class ThresholdConfig:
    probes: int = 8
    trials_per_probe: int = 40
    rho_lo: float = 0.0
    rho_hi: float = 1.0

    def __post_init__(self):
        if self.probes < 6:
            raise ParameterError(f"threshold search needs at least 6 probes, got {self.probes}")
        if self.trials_per_probe < 1:
            raise ParameterError("trials_per_probe must be positive")
        if not (0.0 <= self.rho_lo < self.rho_hi <= 1.0):
            raise ParameterError("need 0 <= rho_lo < rho_hi <= 1")


@dataclass(frozen=True)
class UniversalityConfig:
    """Wigner AMP with separable ``f(x) = sum_k coeffs[k] x^k`` and i.i.d. ``x0``."""

    sizes: tuple = (50, 200)
    T: int = 3
    max_degree: int = 3
    trials: int = 2000
    coeffs: tuple = (0.0, 0.0, 1.0)
    x0_mean: float = 0.0
    x0_std: float = 1.0
    chunk: int = 250

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.sizes or min(self.sizes) < 2:
            raise ParameterError("universality sizes must be at least 2")
        if self.T < 1 or self.max_degree < 1 or self.trials < 2 or self.chunk < 1:
            raise ParameterError("need T >= 1, max_degree >= 1, trials >= 2, chunk >= 1")


@dataclass(frozen=True)
class SeCheckConfig:
    n: int = 4000
    delta: float = 0.5
    epsilon: float = 0.1
    alpha: float | None = None
    trials: int = 200
    T: int = 10
    schedule: str = "empirical"
    symmetric_N: int = 500

    def __post_init__(self):
        if self.trials < 2 or self.T < 1 or self.n < 2 or self.symmetric_N < 2:
            raise ParameterError("se_check needs trials >= 2, T >= 1, n >= 2, symmetric_N >= 2")
        if self.schedule not in ("se", "empirical"):
            raise ParameterError(f"schedule must be 'se' or 'empirical', got {self.schedule!r}")
        if not (0 < self.delta < 1) or not (0 < self.epsilon < 1):
            raise ParameterError("se_check needs delta and epsilon in (0, 1)")


@dataclass(frozen=True)
class TreeConfig:
    N: int = 5
    q: int = 1
    d: int = 2
    t: int = 2
    instances: int = 5

    def __post_init__(self):
        if self.instances < 1:
            raise ParameterError("tree check needs at least one instance")


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 0
    n: int = 2000
    trials: int = 50
    grid: tuple = ()
    deltas: tuple = (0.3, 0.5, 0.7)
    ensembles: tuple = (GAUSSIAN,)
    solver: SolverParams = field(default_factory=lambda: SolverParams(max_iter=THRESHOLD_MAX_ITER))
    support: str = "exact"
    nonzero_law: str = "unit_gaussian"
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    universality: UniversalityConfig = field(default_factory=UniversalityConfig)
    se_check: SeCheckConfig = field(default_factory=SeCheckConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)

    def __post_init__(self):
        grid = tuple((float(d), float(r)) for d, r in self.grid)
        for d, r in grid:
            if not (0 < d < 1) or not (0 <= r <= 1):
                raise ParameterError(f"grid point ({d}, {r}) outside (0,1) x [0,1]")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        ens = tuple(_ensemble(e) for e in self.ensembles)
        if not ens:
            raise ParameterError("at least one ensemble is required")
        object.__setattr__(self, "ensembles", ens)
        if self.trials < 1 or self.n < 2:
            raise ParameterError("need trials >= 1 and n >= 2")
        if self.support not in ("iid", "exact"):
            raise ParameterError(f"support must be 'iid' or 'exact', got {self.support!r}")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown configuration keys: {sorted(unknown)}")
        nested = {"solver": SolverParams, "threshold": ThresholdConfig,
                  "universality": UniversalityConfig, "se_check": SeCheckConfig, "tree": TreeConfig}
        # threshold runs with exact supports need more iterations than the solver default
        data["solver"] = {"max_iter": THRESHOLD_MAX_ITER, **(data.get("solver") or {})}
        for key, sub in nested.items():
            if key in data:
                data[key] = _build(sub, data[key])
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParameterError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ensembles"] = [e.to_dict() for e in self.ensembles]
        out["grid"] = [list(p) for p in self.grid]
        return out
