"""Random matrix ensembles and sparse signals with reproducible streams.

Every sampler takes an explicit seed. Seeds may be a single integer or a
tuple of integers; a tuple ``(master, k1, k2, ...)`` selects an independent
stream from a Philox counter-based generator so that any (trial, matrix)
pair can be regenerated in isolation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import ParameterError, ShapeError

Seed = Union[int, tuple, list]


class Kind(str, Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM_PM = "uniform_pm"
    SPARSE_SUBGAUSSIAN = "sparse_subgaussian"
    MIXTURE = "mixture"


class Normalization(str, Enum):
    VAR_ONE_OVER_M = "var_one_over_m"
    VAR_ONE_OVER_N = "var_one_over_n"
    PROFILE = "profile"


class NonzeroLaw(str, Enum):
    UNIT_GAUSSIAN = "unit_gaussian"
    PLUS_ONE = "plus_one"
    SIGNED_UNIT = "signed_unit"


def make_rng(seed: Seed) -> np.random.Generator:
    """Return a Philox generator for ``seed`` (int or tuple of ints)."""
    if isinstance(seed, (tuple, list)):
        if not seed:
            raise ParameterError("empty seed tuple")
        master, *keys = (int(s) for s in seed)
        ss = np.random.SeedSequence(master, spawn_key=tuple(keys))
    else:
        ss = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class EnsembleSpec:
    """Law of the entries of a random matrix.

    ``p`` is used by ``sparse_subgaussian``; ``base`` and ``nu0`` by
    ``mixture``, which realizes ``sqrt(1 - nu0**2) * base + nu0 * G`` with
    ``G`` Gaussian so the entry variance stays equal to the normalization.
    """

    kind: Kind = Kind.GAUSSIAN
    normalization: Normalization = Normalization.VAR_ONE_OVER_M
    p: float | None = None
    base: EnsembleSpec | None = None
    nu0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        self.validate()

    def validate(self) -> None:
        if self.kind is Kind.SPARSE_SUBGAUSSIAN:
            if self.p is None or not (0.0 < self.p <= 1.0):
                raise ParameterError(f"sparse_subgaussian needs p in (0,1], got {self.p}")
        if self.kind is Kind.MIXTURE:
            if self.base is None:
                raise ParameterError("mixture needs a base ensemble")
            if self.base.kind is Kind.MIXTURE:
                raise ParameterError("nested mixtures are not supported")
            if not (0.0 <= self.nu0 <= 1.0):
                raise ParameterError(f"nu0 must lie in [0, 1], got {self.nu0}")

    @property
    def tag(self) -> str:
        if self.kind is Kind.SPARSE_SUBGAUSSIAN:
            return f"sparse_subgaussian(p={self.p:g})"
        if self.kind is Kind.MIXTURE:
            return f"mixture({self.base.tag},nu0={self.nu0:g})"
        return self.kind.value

    def to_dict(self) -> dict:
        params: dict = {}
        if self.kind is Kind.SPARSE_SUBGAUSSIAN:
            params["p"] = self.p
        elif self.kind is Kind.MIXTURE:
            params["base"] = self.base.to_dict()
            params["nu0"] = self.nu0
        return {"kind": self.kind.value, "params": params,
                "normalization": self.normalization.value}

    @classmethod
    def from_dict(cls, d: dict) -> EnsembleSpec:
        try:
            kind = Kind(d["kind"])
            norm = Normalization(d.get("normalization", "var_one_over_m"))
        except (KeyError, ValueError) as exc:
            raise ParameterError(f"bad ensemble description {d!r}") from exc
        params = d.get("params", {}) or {}
        if kind is Kind.SPARSE_SUBGAUSSIAN:
            return cls(kind, norm, p=params.get("p"))
        if kind is Kind.MIXTURE:
            if "base" not in params:
                raise ParameterError("mixture needs params.base")
            return cls(kind, norm, base=cls.from_dict(params["base"]),
                       nu0=float(params.get("nu0", 0.0)))
        return cls(kind, norm)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> EnsembleSpec:
        return cls.from_dict(json.loads(s))


GAUSSIAN = EnsembleSpec(Kind.GAUSSIAN)
RADEMACHER = EnsembleSpec(Kind.RADEMACHER)


def parse_ensemble(text: str) -> EnsembleSpec:
    """Parse shorthand such as ``gaussian`` or ``sparse_subgaussian:0.3``."""
    text = text.strip()
    if text.startswith("{"):
        return EnsembleSpec.from_json(text)
    name, _, arg = text.partition(":")
    if name == "sparse_subgaussian":
        return EnsembleSpec(Kind.SPARSE_SUBGAUSSIAN, p=float(arg or 1.0))
    if name == "mixture":
        base, _, nu0 = arg.partition(",")
        return EnsembleSpec(Kind.MIXTURE, base=parse_ensemble(base), nu0=float(nu0 or 0.0))
    try:
        return EnsembleSpec(Kind(name))
    except ValueError as exc:
        raise ParameterError(f"unknown ensemble {text!r}") from exc


def _unit_entries(spec: EnsembleSpec, size, rng: np.random.Generator) -> np.ndarray:
    """Entries with mean 0 and variance exactly/in expectation 1."""
    kind = spec.kind
    if kind is Kind.GAUSSIAN:
        return rng.standard_normal(size)
    if kind is Kind.RADEMACHER:
        return rng.integers(0, 2, size=size, dtype=np.int8).astype(float) * 2.0 - 1.0
    if kind is Kind.UNIFORM_PM:
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size)
    if kind is Kind.SPARSE_SUBGAUSSIAN:
        p = spec.p
        u = rng.random(size)
        out = np.zeros(size)
        amp = 1.0 / np.sqrt(p)
        out[u < p / 2] = amp
        out[(u >= p / 2) & (u < p)] = -amp
        return out
    if kind is Kind.MIXTURE:
        base = _unit_entries(spec.base, size, rng)
        if spec.nu0 == 0.0:
            return base
        g = rng.standard_normal(size)
        return np.sqrt(1.0 - spec.nu0 ** 2) * base + spec.nu0 * g
    raise ParameterError(f"unsupported kind {kind}")


def sample_rectangular(spec: EnsembleSpec, m: int, n: int, seed: Seed) -> np.ndarray:
    """Sample an ``m x n`` matrix with independent entries of law ``spec``."""
    if m < 1 or n < 1:
        raise ShapeError(f"dimensions must be positive, got {m}x{n}")
    spec.validate()
    if spec.normalization is Normalization.VAR_ONE_OVER_M:
        scale = 1.0 / np.sqrt(m)
    elif spec.normalization is Normalization.VAR_ONE_OVER_N:
        scale = 1.0 / np.sqrt(n)
    else:
        raise ParameterError("rectangular matrices need var_one_over_m or var_one_over_n")
    return scale * _unit_entries(spec, (m, n), make_rng(seed))


@dataclass(frozen=True)
class VarianceProfile:
    """Block variance profile: ``E A_ij^2 = W[a, b] / N`` for i in class a, j in class b."""

    W: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if W.shape != (c.size, c.size):
            raise ShapeError(f"W has shape {W.shape} but there are {c.size} classes")
        if not np.array_equal(W, W.T):
            raise ParameterError("W must be symmetric")
        if np.any(W < 0):
            raise ParameterError("W must be entrywise nonnegative")
        inside = (c > 0) & (c < 1) if c.size > 1 else c > 0
        if not inside.all() or abs(c.sum() - 1.0) > 1e-12:
            raise ParameterError(f"class fractions must lie in (0,1) and sum to 1, got {c}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "c", c)

    @property
    def k(self) -> int:
        return self.c.size

    @classmethod
    def wigner(cls) -> VarianceProfile:
        return cls(np.array([[1.0]]), np.array([1.0]))

    def sizes(self, N: int) -> np.ndarray:
        """Class sizes by largest remainder; each is within 1 of ``c_a * N``."""
        if N < self.k:
            raise ShapeError(f"N={N} is smaller than the number of classes {self.k}")
        raw = self.c * N
        sizes = np.floor(raw).astype(int)
        short = N - sizes.sum()
        order = np.argsort(-(raw - sizes), kind="stable")
        sizes[order[:short]] += 1
        if np.any(sizes == 0):
            sizes[sizes == 0] = 1
            while sizes.sum() > N:
                sizes[np.argmax(sizes)] -= 1
        return sizes

    def partition(self, N: int) -> np.ndarray:
        """Class index of each coordinate; classes occupy contiguous blocks."""
        return np.repeat(np.arange(self.k), self.sizes(N))

    def expected_square(self, N: int) -> np.ndarray:
        """The ``N x N`` matrix of ``E A_ij^2`` (zero on the diagonal)."""
        part = self.partition(N)
        V = self.W[np.ix_(part, part)] / N
        np.fill_diagonal(V, 0.0)
        return V


def sample_symmetric(profile: VarianceProfile, spec: EnsembleSpec, N: int, seed: Seed) -> np.ndarray:
    """Symmetric ``N x N`` matrix with zero diagonal and block variance profile."""
    if spec.normalization is Normalization.VAR_ONE_OVER_M:
        raise ParameterError("symmetric matrices use var_one_over_n or profile normalization")
    spec.validate()
    part = profile.partition(N)
    rng = make_rng(seed)
    iu = np.triu_indices(N, k=1)
    vals = _unit_entries(spec, iu[0].size, rng)
    vals *= np.sqrt(profile.W[part[iu[0]], part[iu[1]]] / N)
    A = np.zeros((N, N))
    A[iu] = vals
    return A + A.T


@dataclass(frozen=True)
class SignalSpec:
    """i.i.d. signal law ``(1 - epsilon) delta_0 + epsilon * gamma``."""

    epsilon: float
    nonzero_law: NonzeroLaw = NonzeroLaw.UNIT_GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "nonzero_law", NonzeroLaw(self.nonzero_law))
        if not (0.0 <= self.epsilon <= 1.0):
            raise ParameterError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    @property
    def second_moment(self) -> float:
        return self.epsilon  # every nonzero law has unit second moment

    def components(self) -> list[tuple[float, float, float]]:
        """Mixture components ``(weight, mean, variance)``; the atom at 0 comes first."""
        eps = self.epsilon
        comps = [(1.0 - eps, 0.0, 0.0)]
        if self.nonzero_law is NonzeroLaw.UNIT_GAUSSIAN:
            comps.append((eps, 0.0, 1.0))
        elif self.nonzero_law is NonzeroLaw.PLUS_ONE:
            comps.append((eps, 1.0, 0.0))
        else:
            comps += [(eps / 2, 1.0, 0.0), (eps / 2, -1.0, 0.0)]
        return [c for c in comps if c[0] > 0]

    def to_dict(self) -> dict:
        return {"kind": self.nonzero_law.value, "params": {"epsilon": self.epsilon},
                "normalization": "none"}

    @classmethod
    def from_dict(cls, d: dict) -> SignalSpec:
        try:
            return cls(float(d["params"]["epsilon"]), NonzeroLaw(d["kind"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParameterError(f"bad signal description {d!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> SignalSpec:
        return cls.from_dict(json.loads(s))


def sample_signal(spec: SignalSpec, n: int, seed: Seed) -> np.ndarray:
    rng = make_rng(seed)
    support = rng.random(n) < spec.epsilon
    law = spec.nonzero_law
    if law is NonzeroLaw.UNIT_GAUSSIAN:
        vals = rng.standard_normal(n)
    elif law is NonzeroLaw.PLUS_ONE:
        vals = np.ones(n)
    else:
        vals = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    return np.where(support, vals, 0.0)
