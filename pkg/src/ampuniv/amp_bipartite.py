"""AMP on a rectangular matrix, its state evolution, and the symmetric embedding.

For ``A`` of shape ``m x n`` (``E A_ij^2 = 1/m``):

    z^t     = A f(x^t; t)   - B_t h(z^{t-1}; t-1)
    x^{t+1} = A^T h(z^t; t) - D_t f(x^t; t)

with ``B_t`` acting on row ``j`` by ``sum_k A_jk^2 Df(x^t_k; t)`` and ``D_t``
acting on row ``i`` by ``sum_l A_li^2 Dh(z^t_l; t)``; ``h(z^{-1}) = 0``.
Labels, if any, are carried by the component functions themselves (e.g.
``LabeledFunction``).
"""

from __future__ import annotations

import csv
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .amp_symmetric import AmpInstance
from .errors import DivergenceError, ParameterError, ShapeError
from .functions import check_jacobian, validate_function
from .state_evolution import GH_NODES, check_psd, moment_matrix


@dataclass(frozen=True, eq=False)
class BipartiteInstance:
    A: np.ndarray
    f: object
    h: object
    x0: np.ndarray
    check: bool = True

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        x0 = np.asarray(self.x0, dtype=float)
        if x0.ndim == 1:
            x0 = x0[:, None]
        if A.ndim != 2 or x0.shape[0] != A.shape[1]:
            raise ShapeError(f"A is {A.shape}, x0 is {x0.shape}")
        q = x0.shape[1]
        validate_function(self.f, q)
        validate_function(self.h, q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "_A2", A * A)
        if self.check:
            rng = np.random.default_rng(0)
            for fn, rows in ((self.f, A.shape[1]), (self.h, A.shape[0])):
                err = check_jacobian(fn, rng.standard_normal((rows, q)), 0)
                if err > 1e-6:
                    raise ParameterError(f"Jacobian disagrees with finite differences (rel err {err:.2e})")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def q(self) -> int:
        return self.x0.shape[1]

    @property
    def delta(self) -> float:
        return self.m / self.n


@dataclass(frozen=True)
class BipartiteState:
    """``x`` is ``x^t``; ``z`` is ``z^{t-1}`` (zeros at ``t = 0``)."""

    t: int
    x: np.ndarray
    z: np.ndarray

    @classmethod
    def initial(cls, inst: BipartiteInstance) -> BipartiteState:
        return cls(0, inst.x0.copy(), np.zeros((inst.m, inst.q)))


def bipartite_step(inst: BipartiteInstance, state: BipartiteState) -> BipartiteState:
    """Compute ``z^t`` and then ``x^{t+1}``."""
    t, x = state.t, state.x
    if x.shape != inst.x0.shape or state.z.shape != (inst.m, inst.q):
        raise ShapeError("state does not match the instance dimensions")
    fx = inst.f.value(x, t)
    z = inst.A @ fx
    if t > 0:
        B = np.einsum("jk,krs->jrs", inst._A2, inst.f.jacobian(x, t))
        z = z - np.einsum("jrs,js->jr", B, inst.h.value(state.z, t - 1))
    D = np.einsum("li,lrs->irs", inst._A2, inst.h.jacobian(z, t))
    x_new = inst.A.T @ inst.h.value(z, t) - np.einsum("irs,is->ir", D, fx)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(x_new))):
        raise DivergenceError(t + 1)
    return BipartiteState(t + 1, x_new, z)


def embedding_profile(delta: float) -> tuple[np.ndarray, np.ndarray]:
    """``(W, c)`` of the two-class symmetric instance; class 0 holds the ``z`` side."""
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    w = (1.0 + delta) / delta
    return np.array([[0.0, w], [w, 0.0]]), np.array([delta / (1.0 + delta), 1.0 / (1.0 + delta)])


class _Alternating:
    """``g`` of the embedding: ``h`` on the first ``m`` rows at odd times,
    ``f`` on the last ``n`` rows at even times, zero otherwise."""

    def __init__(self, f, h, m: int, q: int):
        self.f, self.h, self.m, self.q = f, h, m, q

    def value(self, x, t):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if t % 2:
            out[:self.m] = self.h.value(x[:self.m], (t - 1) // 2)
        else:
            out[self.m:] = self.f.value(x[self.m:], t // 2)
        return out

    def jacobian(self, x, t):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.q,))
        if t % 2:
            out[:self.m] = self.h.jacobian(x[:self.m], (t - 1) // 2)
        else:
            out[self.m:] = self.f.jacobian(x[self.m:], t // 2)
        return out


def symmetric_embedding(inst: BipartiteInstance) -> AmpInstance:
    """Symmetric instance of size ``m + n`` whose orbit contains the bipartite orbit.

    With ``xs`` the symmetric iterates, ``xs^{2t+1}[:m] = z^t`` and
    ``xs^{2t}[m:] = x^t``.
    """
    m, n, q = inst.m, inst.n, inst.q
    N = m + n
    As = np.zeros((N, N))
    As[:m, m:] = inst.A
    As[m:, :m] = inst.A.T
    x0 = np.zeros((N, q))
    x0[m:] = inst.x0
    part = np.r_[np.zeros(m, dtype=int), np.ones(n, dtype=int)]
    return AmpInstance(As, _Alternating(inst.f, inst.h, m, q), x0, partition=part, check=False)


@dataclass(frozen=True)
class BipartiteModel:
    """Limit description: ``f_map(t)``/``h_map(t)`` return a ``PolyMap`` or a callable ``(x, y)``.

    ``Q`` is the label law on the ``x`` side, ``P`` on the ``z`` side.
    """

    f_map: Callable
    h_map: Callable
    delta: float
    q: int
    Xi0: np.ndarray
    q_label: int = 0
    Q: Sequence | None = None
    P: Sequence | None = None
    nodes: int = GH_NODES

    def __post_init__(self):
        if self.delta <= 0:
            raise ParameterError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "Xi0", check_psd(np.reshape(self.Xi0, (self.q, self.q)), "Xi0"))

    def h_moment(self, times, Xi) -> np.ndarray:
        return moment_matrix([self.h_map(t) for t in times], Xi, self.P, self.q, self.q_label, self.nodes)

    def f_moment(self, times, Sigma) -> np.ndarray:
        return moment_matrix([self.f_map(t) for t in times], Sigma, self.Q, self.q, self.q_label,
                             self.nodes) / self.delta


@dataclass(frozen=True)
class BipartiteSeState:
    """``Sigma`` predicts ``x^t`` (``None`` at ``t = 0``); ``Xi`` predicts ``z^t``."""

    t: int
    Sigma: np.ndarray | None
    Xi: np.ndarray


def se_bipartite_step(state: BipartiteSeState, model: BipartiteModel) -> BipartiteSeState:
    t = state.t + 1
    Sigma = check_psd(model.h_moment((t - 1,), state.Xi), f"Sigma^{t}")
    Xi = check_psd(model.f_moment((t,), Sigma), f"Xi^{t}")
    return BipartiteSeState(t, Sigma, Xi)


def se_bipartite_run(model: BipartiteModel, T: int) -> list[BipartiteSeState]:
    states = [BipartiteSeState(0, None, model.Xi0)]
    for _ in range(T):
        states.append(se_bipartite_step(states[-1], model))
    return states


def se_two_time_bipartite(model: BipartiteModel, T: int) -> dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]:
    """``(Sigma^{t,s}, Xi^{t,s})`` for ``1 <= s <= t <= T`` keyed by ``(t, s)``."""
    single = se_bipartite_run(model, T)
    q = model.q
    out = {}
    for lag in range(T):
        Xi = np.zeros((2 * q, 2 * q))
        if lag == 0:
            Xi[:] = np.block([[model.Xi0, model.Xi0], [model.Xi0, model.Xi0]])
        else:
            Xi[:q, :q] = single[lag].Xi
            Xi[q:, q:] = model.Xi0
        t, s = lag, 0
        for _ in range(T - lag):
            Sigma = check_psd(model.h_moment((t, s), Xi), f"Sigma^{{{t + 1},{s + 1}}}")
            t, s = t + 1, s + 1
            Xi = check_psd(model.f_moment((t, s), Sigma), f"Xi^{{{t},{s}}}")
            out[(t, s)] = (Sigma, Xi)
    return out


Observer = Callable[[np.ndarray], dict]

BIPARTITE_CSV_FIELDS = ("trial_id", "t", "side", "statistic_name", "value")


def run_bipartite(inst: BipartiteInstance, T: int, observers: dict[str, Observer] | None = None) -> list[dict]:
    """Run ``T`` steps; ``observers[name](arr) -> value`` is applied to ``x^t`` and ``z^{t-1}``."""
    if T < 1:
        raise ParameterError(f"T must be at least 1, got {T}")
    observers = observers or {"m2": lambda a: float(np.mean(a[:, 0] ** 2))}
    state = BipartiteState.initial(inst)
    rows = []
    for _ in range(T):
        state = bipartite_step(inst, state)
        for side, arr, t in (("z", state.z, state.t - 1), ("x", state.x, state.t)):
            for name, obs in sorted(observers.items()):
                rows.append({"t": t, "side": side, "statistic_name": name, "value": repr(float(obs(arr)))})
    return rows


def write_bipartite_csv(path, rows: Iterable[dict], trial_id=0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BIPARTITE_CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({"trial_id": trial_id, **r})
