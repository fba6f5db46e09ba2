"""Symmetric AMP orbit and the two message-passing reference iterations.

``amp_step`` implements

    x^{t+1}_i = sum_j A_ij f^j(x^t_j, t) - (sum_j A_ij^2 Df^j(x^t_j, t)) f^i(x^{t-1}_i, t-1)

with the convention ``f(x^{-1}, -1) = 0``. ``mp_step`` and ``mp_iid_step``
propagate the full ``N x N`` array of directed messages; they store it
densely and are meant for oracle-scale problems (N up to a few hundred).
"""

from __future__ import annotations

import csv
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergenceError, ParameterError, ShapeError
from .functions import check_jacobian, validate_function


@dataclass(frozen=True, eq=False)
class AmpInstance:
    """A frozen symmetric AMP problem ``(A, f, x0)`` plus class structure.

    ``expected_sq`` (``E A_ij^2``) is only consulted when ``onsager`` is
    ``"averaged"``; it defaults to ``1/N`` off the diagonal.
    """

    A: np.ndarray
    f: object
    x0: np.ndarray
    partition: np.ndarray | None = None
    labels: np.ndarray | None = None
    onsager: str = "realized"
    expected_sq: np.ndarray | None = None
    check: bool = True

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        x0 = np.asarray(self.x0, dtype=float)
        if x0.ndim == 1:
            x0 = x0[:, None]
        N = A.shape[0]
        if A.shape != (N, N):
            raise ShapeError(f"A must be square, got {A.shape}")
        if x0.shape[0] != N:
            raise ShapeError(f"x0 has {x0.shape[0]} rows, A is {N}x{N}")
        if not np.array_equal(A, A.T):
            raise ParameterError("A must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ParameterError("A must have zero diagonal")
        validate_function(self.f, x0.shape[1])
        if self.onsager not in ("realized", "averaged"):
            raise ParameterError(f"onsager must be 'realized' or 'averaged', got {self.onsager!r}")
        part = np.zeros(N, dtype=int) if self.partition is None else np.asarray(self.partition, dtype=int)
        if part.shape != (N,) or part.min() < 0:
            raise ShapeError("partition must assign a nonnegative class to every coordinate")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "partition", part)
        object.__setattr__(self, "_A2", A * A)
        if self.check:
            rng = np.random.default_rng(0)
            pts = rng.standard_normal(x0.shape)
            err = check_jacobian(self.f, pts, 0)
            if err > 1e-6:
                raise ParameterError(f"Jacobian disagrees with finite differences (rel err {err:.2e})")

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.x0.shape[1]

    @property
    def k(self) -> int:
        return int(self.partition.max()) + 1

    def onsager_weights(self) -> np.ndarray:
        if self.onsager == "realized":
            return self._A2
        if self.expected_sq is not None:
            return np.asarray(self.expected_sq, dtype=float)
        V = np.full((self.N, self.N), 1.0 / self.N)
        np.fill_diagonal(V, 0.0)
        return V

    def permuted(self, perm: Sequence[int]) -> AmpInstance:
        """Relabel coordinates: new coordinate ``i`` is old coordinate ``perm[i]``.

        Only valid for coordinate-independent ``f`` (e.g. ``Separable``).
        """
        perm = np.asarray(perm)
        return replace(
            self,
            A=self.A[np.ix_(perm, perm)],
            x0=self.x0[perm],
            partition=self.partition[perm],
            labels=None if self.labels is None else np.asarray(self.labels)[perm],
            expected_sq=None if self.expected_sq is None else self.expected_sq[np.ix_(perm, perm)],
        )


@dataclass(frozen=True)
class OrbitState:
    t: int
    x_curr: np.ndarray
    x_prev: np.ndarray

    @classmethod
    def initial(cls, inst: AmpInstance) -> OrbitState:
        return cls(0, inst.x0.copy(), np.zeros_like(inst.x0))


@dataclass(frozen=True)
class MessageState:
    """``z[i, j]`` is the message ``z_{i->j}``; the diagonal is unused."""

    t: int
    z: np.ndarray
    z_node: np.ndarray

    @classmethod
    def initial(cls, inst: AmpInstance) -> MessageState:
        N = inst.N
        z = np.broadcast_to(inst.x0[:, None, :], (N, N, inst.q)).copy()
        return cls(0, z, inst.x0.copy())


def _check_finite(arr: np.ndarray, t: int) -> None:
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(t)


def amp_step(inst: AmpInstance, state: OrbitState) -> OrbitState:
    """One AMP iteration ``x^t -> x^{t+1}``."""
    x, t = state.x_curr, state.t
    if x.shape != inst.x0.shape:
        raise ShapeError(f"state has shape {x.shape}, instance expects {inst.x0.shape}")
    fx = inst.f.value(x, t)
    new = inst.A @ fx
    if t > 0:
        J = inst.f.jacobian(x, t)                                   # (N, q, q)
        B = np.einsum("ij,jrs->irs", inst.onsager_weights(), J)      # (N, q, q)
        fprev = inst.f.value(state.x_prev, t - 1)
        new = new - np.einsum("irs,is->ir", B, fprev)
    _check_finite(new, t + 1)
    return OrbitState(t + 1, new, x)


def _message_update(A: np.ndarray, f, state: MessageState) -> MessageState:
    N = A.shape[0]
    if N < 2:
        raise ShapeError("message passing needs N >= 2")
    F = f.value(state.z, state.t)                  # F[l, i] = f^l(z_{l->i}, t)
    M = A[:, :, None] * F                          # M[l, i] = A_li f^l(z_{l->i})
    node = M.sum(axis=0)                           # z^{t+1}_i
    z = node[:, None, :] - M.transpose(1, 0, 2)    # drop l = j
    _check_finite(z, state.t + 1)
    return MessageState(state.t + 1, z, node)


def mp_step(inst: AmpInstance, state: MessageState) -> MessageState:
    """Non-backtracking message update with the instance matrix."""
    return _message_update(inst.A, inst.f, state)


def mp_iid_step(inst: AmpInstance, state: MessageState, fresh_A: np.ndarray) -> MessageState:
    """Message update with a fresh matrix drawn for this iteration."""
    fresh_A = np.asarray(fresh_A, dtype=float)
    if fresh_A.shape != inst.A.shape:
        raise ShapeError(f"fresh matrix has shape {fresh_A.shape}, expected {inst.A.shape}")
    return _message_update(fresh_A, inst.f, state)


Observer = Callable[[np.ndarray, AmpInstance, int], dict]


def class_moments(powers: Iterable[int] = (1, 2), component: int = 0) -> Observer:
    """Observer returning ``(1/|C_a|) sum_{i in C_a} x_i(component)**p`` per class."""
    powers = tuple(powers)

    def observe(x, inst, t):
        out = {}
        col = x[:, component]
        for a in range(inst.k):
            rows = inst.partition == a
            for p in powers:
                out[(a, f"m{p}")] = float(np.mean(col[rows] ** p))
        return out

    return observe


def labeled_average(psi: Callable, name: str) -> Observer:
    """Observer for ``(1/|C_a|) sum psi(x_i, Y(i))``."""

    def observe(x, inst, t):
        y = inst.labels
        out = {}
        for a in range(inst.k):
            rows = inst.partition == a
            out[(a, name)] = float(np.mean(psi(x[rows], None if y is None else np.asarray(y)[rows])))
        return out

    return observe


@dataclass
class OrbitSummary:
    t: int
    stats: dict = field(default_factory=dict)


def run_orbit(inst: AmpInstance, T: int, observers: Sequence[Observer] = ()) -> list[OrbitSummary]:
    """Run ``T`` AMP iterations, recording every observer after each step.

    On divergence the ``DivergenceError`` carries the summaries collected so far.
    """
    if T < 1:
        raise ParameterError(f"T must be at least 1, got {T}")
    state = OrbitState.initial(inst)
    out: list[OrbitSummary] = []
    for _ in range(T):
        try:
            state = amp_step(inst, state)
        except DivergenceError as err:
            raise DivergenceError(err.t, partial=out) from None
        summary = OrbitSummary(state.t)
        for obs in observers:
            summary.stats.update(obs(state.x_curr, inst, state.t))
        out.append(summary)
    return out


ORBIT_CSV_FIELDS = ("trial_id", "t", "class", "statistic_name", "value")


def summary_rows(summaries: Iterable[OrbitSummary], trial_id) -> list[dict]:
    rows = []
    for s in summaries:
        for (a, name), v in sorted(s.stats.items()):
            rows.append({"trial_id": trial_id, "t": s.t, "class": a, "statistic_name": name, "value": repr(float(v))})
    return rows


def write_summary_csv(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ORBIT_CSV_FIELDS)
        w.writeheader()
        w.writerows(rows)
