"""Component functions for AMP iterations.

An AMP instance applies a possibly coordinate-dependent map
``f^i(., t): R^q -> R^q`` to every row of an ``N x q`` state. All
implementations here share a tiny duck-typed interface:

``value(x, t)``
    ``x`` has shape ``(N, ..., q)`` with the coordinate on axis 0; returns an
    array of the same shape.
``jacobian(x, t)``
    ``x`` has shape ``(N, q)``; returns ``(N, q, q)`` with entry
    ``[i, r, s] = d f^i_r / d x_s``.

Polynomial maps are represented exactly (``Poly``/``PolyMap``) so that the
state-evolution module can take Gaussian expectations in closed form and the
tree oracle can read off coefficients.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ParameterError, ShapeError


def exponent_tuples(q: int, d: int) -> list[tuple[int, ...]]:
    """All ``(i_1..i_q)`` with nonnegative entries summing to at most ``d``.

    Ordered by total degree, then lexicographically.
    """
    out = []
    for total in range(d + 1):
        for e in itertools.product(range(total + 1), repeat=q):
            if sum(e) == total:
                out.append(e)
    return sorted(out, key=lambda e: (sum(e), tuple(-v for v in e)))


class Poly:
    """Multivariate polynomial stored as ``{exponent tuple: coefficient}``."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[tuple[int, ...], float] | None = None):
        self.nvars = nvars
        self.terms: dict[tuple[int, ...], float] = {}
        for e, c in (terms or {}).items():
            e = tuple(int(v) for v in e)
            if len(e) != nvars:
                raise ShapeError(f"exponent {e} does not have {nvars} entries")
            if c != 0:
                self.terms[e] = self.terms.get(e, 0.0) + float(c)

    @classmethod
    def constant(cls, nvars: int, c: float) -> Poly:
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars: int, i: int, coef: float = 1.0) -> Poly:
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): coef})

    @classmethod
    def univariate(cls, coeffs: Sequence[float]) -> Poly:
        """``coeffs[k]`` multiplies ``x**k``."""
        return cls(1, {(k,): c for k, c in enumerate(coeffs)})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def __repr__(self) -> str:
        return f"Poly({self.nvars}, {self.terms!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __add__(self, other) -> Poly:
        if not isinstance(other, Poly):
            other = Poly.constant(self.nvars, other)
        out = Poly(self.nvars, self.terms)
        for e, c in other.terms.items():
            out.terms[e] = out.terms.get(e, 0.0) + c
        out.terms = {e: c for e, c in out.terms.items() if c != 0}
        return out

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> Poly:
        return self + (-other if isinstance(other, Poly) else -float(other))

    def __mul__(self, other) -> Poly:
        if not isinstance(other, Poly):
            return Poly(self.nvars, {e: c * other for e, c in self.terms.items()})
        if other.nvars != self.nvars:
            raise ShapeError("cannot multiply polynomials over different variable counts")
        out: dict[tuple[int, ...], float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def derivative(self, i: int) -> Poly:
        out = {}
        for e, c in self.terms.items():
            if e[i] > 0:
                e2 = list(e)
                e2[i] -= 1
                out[tuple(e2)] = out.get(tuple(e2), 0.0) + c * e[i]
        return Poly(self.nvars, out)

    def embed(self, nvars: int, positions: Sequence[int]) -> Poly:
        """Re-express over ``nvars`` variables, variable ``k`` moving to ``positions[k]``."""
        out = {}
        for e, c in self.terms.items():
            e2 = [0] * nvars
            for k, p in enumerate(positions):
                e2[p] += e[k]
            out[tuple(e2)] = out.get(tuple(e2), 0.0) + c
        return Poly(nvars, out)

    def shift(self, offsets: Sequence[float]) -> Poly:
        """Return ``p(x + offsets)``."""
        out: dict[tuple[int, ...], float] = {}
        for e, c in self.terms.items():
            ranges = [range(k + 1) for k in e]
            for sub in itertools.product(*ranges):
                w = c
                for k, (ek, sk) in enumerate(zip(e, sub)):
                    if ek != sk:
                        w *= comb(ek, sk) * offsets[k] ** (ek - sk)
                out[sub] = out.get(sub, 0.0) + w
        return Poly(self.nvars, out)

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points ``x`` with the variable index on the last axis."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.nvars:
            raise ShapeError(f"expected last axis {self.nvars}, got {x.shape}")
        out = np.zeros(x.shape[:-1])
        for e, c in self.terms.items():
            term = np.full(x.shape[:-1], c)
            for k, p in enumerate(e):
                if p:
                    term = term * x[..., k] ** p
            out = out + term
        return out


@dataclass(frozen=True)
class PolyMap:
    """A polynomial map ``(x, y) -> R^q`` with ``x`` in R^q and labels ``y`` in R^{q_label}.

    ``components[r]`` is a ``Poly`` over ``q + q_label`` variables, the first
    ``q`` being ``x``.
    """

    components: tuple[Poly, ...]
    q_label: int = 0

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        nv = self.q + self.q_label
        for p in comps:
            if p.nvars != nv:
                raise ShapeError(f"component has {p.nvars} variables, expected {nv}")

    @property
    def q(self) -> int:
        return len(self.components)

    @classmethod
    def univariate(cls, coeffs: Sequence[float]) -> PolyMap:
        return cls((Poly.univariate(coeffs),))

    @classmethod
    def linear(cls, M) -> PolyMap:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        q = M.shape[0]
        return cls(tuple(sum((Poly.var(q, s, M[r, s]) for s in range(q)), Poly(q)) for r in range(q)))

    @property
    def degree(self) -> int:
        return max(p.degree for p in self.components)

    def _stack(self, x, y):
        x = np.asarray(x, dtype=float)
        if self.q_label == 0:
            return x
        y = np.broadcast_to(np.asarray(y, dtype=float), x.shape[:-1] + (self.q_label,))
        return np.concatenate([x, y], axis=-1)

    def evaluate(self, x, y=None) -> np.ndarray:
        pts = self._stack(x, y)
        return np.stack([p(pts) for p in self.components], axis=-1)

    def jacobian(self, x, y=None) -> np.ndarray:
        pts = self._stack(x, y)
        q = self.q
        out = np.empty(pts.shape[:-1] + (q, q))
        for r, p in enumerate(self.components):
            for s in range(q):
                out[..., r, s] = p.derivative(s)(pts)
        return out


class Separable:
    """The same scalar-state map applied to every coordinate (q = 1).

    ``fn(x, t)`` and ``dfn(x, t)`` act elementwise on arrays.
    """

    q = 1

    def __init__(self, fn: Callable, dfn: Callable, name: str = "f"):
        self.fn = fn
        self.dfn = dfn
        self.name = name

    @classmethod
    def polynomial(cls, coeffs: Sequence[float] | Callable[[int], Sequence[float]]) -> Separable:
        """Polynomial ``sum_k c_k(t) x**k``; ``coeffs`` may depend on ``t``."""
        get = coeffs if callable(coeffs) else (lambda t, c=tuple(coeffs): c)

        def fn(x, t):
            return np.polynomial.polynomial.polyval(x, get(t))

        def dfn(x, t):
            return np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(get(t)))

        return cls(fn, dfn, name=f"poly{tuple(get(0))}")

    def value(self, x, t):
        return self.fn(np.asarray(x, dtype=float), t)

    def jacobian(self, x, t):
        x = np.asarray(x, dtype=float)
        return self.dfn(x, t)[..., None]


def identity() -> Separable:
    return Separable(lambda x, t: np.array(x, dtype=float), lambda x, t: np.ones_like(x), "identity")


def zero() -> Separable:
    return Separable(lambda x, t: np.zeros_like(x), lambda x, t: np.zeros_like(x), "zero")


class LabeledFunction:
    """Coordinate ``i`` in class ``a`` uses ``g(x, Y(i), a, t)``.

    ``maps(a, t)`` returns either a ``PolyMap`` or a pair of callables
    ``(value(x, y), jacobian(x, y))`` acting on row batches.
    """

    def __init__(self, maps: Callable, partition, labels=None, q: int = 1):
        self.maps = maps
        self.partition = np.asarray(partition, dtype=int)
        self.labels = None if labels is None else np.asarray(labels, dtype=float)
        if self.labels is not None and self.labels.ndim == 1:
            self.labels = self.labels[:, None]
        self.q = q
        self._rows = [np.flatnonzero(self.partition == a) for a in range(self.partition.max() + 1)]

    def _labels_for(self, rows, x_shape):
        if self.labels is None:
            return None
        y = self.labels[rows]
        return y.reshape(y.shape[:1] + (1,) * (len(x_shape) - 2) + y.shape[1:])

    def value(self, x, t):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for a, rows in enumerate(self._rows):
            g = self.maps(a, t)
            y = self._labels_for(rows, x.shape)
            out[rows] = g.evaluate(x[rows], y) if isinstance(g, PolyMap) else g[0](x[rows], y)
        return out

    def jacobian(self, x, t):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (self.q,))
        for a, rows in enumerate(self._rows):
            g = self.maps(a, t)
            y = self._labels_for(rows, x.shape)
            out[rows] = g.jacobian(x[rows], y) if isinstance(g, PolyMap) else g[1](x[rows], y)
        return out


class CoordinatePolynomial:
    """Per-coordinate polynomial family in explicit coefficient form.

    ``coeffs[l, t, r, e]`` is the coefficient of ``prod_s x(s)**exps[e][s]`` in
    ``f^l_r(x, t)``; times beyond the last slot reuse the last slot.
    """

    def __init__(self, coeffs, q: int, d: int):
        coeffs = np.asarray(coeffs, dtype=float)
        self.exps = exponent_tuples(q, d)
        if coeffs.ndim != 4 or coeffs.shape[2] != q or coeffs.shape[3] != len(self.exps):
            raise ShapeError(f"coefficient array shape {coeffs.shape} does not match q={q}, d={d}")
        self.coeffs = coeffs
        self.q = q
        self.d = d
        self._E = np.array(self.exps, dtype=int)

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    def at(self, t: int) -> np.ndarray:
        """Coefficients ``(N, q, E)`` in force at time ``t``."""
        return self.coeffs[:, min(t, self.coeffs.shape[1] - 1)]

    def _monomials(self, x):
        # (..., q) -> (..., E)
        return np.prod(x[..., None, :] ** self._E, axis=-1)

    def value(self, x, t):
        x = np.asarray(x, dtype=float)
        c = self.at(t)
        mono = self._monomials(x)                       # (N, ..., E)
        cc = c.reshape((c.shape[0],) + (1,) * (x.ndim - 2) + c.shape[1:])
        return np.einsum("...re,...e->...r", cc, mono)

    def jacobian(self, x, t):
        x = np.asarray(x, dtype=float)
        c = self.at(t)
        N, q = x.shape
        out = np.zeros((N, q, q))
        for s in range(q):
            E = self._E.copy()
            pw = E[:, s].astype(float)
            E[:, s] = np.maximum(E[:, s] - 1, 0)
            dmono = pw * np.prod(x[:, None, :] ** E, axis=-1)     # (N, E)
            out[:, :, s] = np.einsum("nre,ne->nr", c, dmono)
        return out

    @classmethod
    def random(cls, N: int, q: int, d: int, T: int, rng: np.random.Generator, scale: float = 1.0):
        E = len(exponent_tuples(q, d))
        return cls(scale * rng.uniform(-1, 1, size=(N, T, q, E)), q, d)


def check_jacobian(f, x, t, h: float = 1e-5) -> float:
    """Largest relative discrepancy between ``f.jacobian`` and central differences."""
    x = np.asarray(x, dtype=float)
    J = f.jacobian(x, t)
    N, q = x.shape
    num = np.empty_like(J)
    for s in range(q):
        dx = np.zeros_like(x)
        dx[:, s] = h
        num[:, :, s] = (f.value(x + dx, t) - f.value(x - dx, t)) / (2 * h)
    scale = max(1.0, float(np.max(np.abs(J))))
    return float(np.max(np.abs(J - num)) / scale)


def validate_function(f, q: int) -> None:
    if getattr(f, "q", q) != q:
        raise ShapeError(f"function has q={f.q}, instance has q={q}")
    for attr in ("value", "jacobian"):
        if not callable(getattr(f, attr, None)):
            raise ParameterError(f"component function lacks {attr}()")
