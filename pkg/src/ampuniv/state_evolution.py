"""Matrix state evolution for converging sequences of symmetric AMP instances.

Single time:

    Sigma^t_a     = sum_b c_b W_ab Sigma_hat^{t-1}_b
    Sigma_hat^t_a = E g(Z, Y, a, t) g(Z, Y, a, t)^T,   Z ~ N(0, Sigma^t_a), Y ~ P_a

Two times: the same with ``(Z^t, Z^s) ~ N(0, Sigma^{t,s}_a)`` and the
concatenated output ``[g(Z^t, Y, a, t), g(Z^s, Y, a, s)]``.

Gaussian expectations of polynomials are evaluated exactly by Gaussian
integration by parts (Wick pairing); other maps use tensor Gauss-Hermite
quadrature. Label laws are finite mixtures of Gaussian components
``(weight, mean, cov)``; a point mass is a component with zero covariance.
"""

from __future__ import annotations

import csv
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError, ParameterError, ShapeError
from .functions import Poly, PolyMap

MAX_DEGREE = 8
PSD_TOL = 1e-10
GH_NODES = 41
MAX_QUAD_DIMS = 3

LabelComponent = tuple  # (weight, mean (q_label,), cov (q_label, q_label))


def point_masses(values, weights=None) -> list[LabelComponent]:
    """Label law putting mass ``weights[k]`` on ``values[k]``."""
    values = np.atleast_2d(np.asarray(values, dtype=float).T).T
    n, d = values.shape
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    return [(float(w[k]), values[k], np.zeros((d, d))) for k in range(n)]


def check_psd(S, what: str = "matrix") -> np.ndarray:
    """Symmetrize ``S``; reject eigenvalues below ``-PSD_TOL``, clip tiny negatives."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    S = 0.5 * (S + S.T)
    if S.size == 0:
        return S
    lam, V = np.linalg.eigh(S)
    if lam[0] < -PSD_TOL:
        raise DomainError(f"{what} is not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    if lam[0] < 0:
        S = (V * np.maximum(lam, 0.0)) @ V.T
        S = 0.5 * (S + S.T)
    return S


class _Wick:
    """Centered Gaussian moments ``E prod_i x_i**e_i`` for a fixed covariance."""

    def __init__(self, S: np.ndarray):
        self.S = S
        self.memo: dict[tuple[int, ...], float] = {}

    def __call__(self, e: tuple[int, ...]) -> float:
        total = sum(e)
        if total == 0:
            return 1.0
        if total % 2:
            return 0.0
        hit = self.memo.get(e)
        if hit is not None:
            return hit
        # E[x_i M] = sum_j S_ij E[d_j M] with M the monomial minus one x_i
        i = next(k for k, v in enumerate(e) if v)
        rest = list(e)
        rest[i] -= 1
        val = 0.0
        for j, p in enumerate(rest):
            if p and self.S[i, j] != 0.0:
                sub = list(rest)
                sub[j] -= 1
                val += self.S[i, j] * p * self(tuple(sub))
        self.memo[e] = val
        return val


def _poly_expect(poly: Poly, mean: np.ndarray, wick: _Wick) -> float:
    shifted = poly.shift(mean) if np.any(mean) else poly
    return float(sum(c * wick(e) for e, c in shifted.terms.items()))


def _joint_components(Sigma: np.ndarray, mixture) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Components of the joint law of ``(Z, Y)`` with ``Z ~ N(0, Sigma)`` independent of ``Y``."""
    dz = Sigma.shape[0]
    if not mixture:
        return [(1.0, np.zeros(dz), Sigma)]
    out = []
    for w, mu, C in mixture:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float)).reshape(mu.size, mu.size)
        full = np.zeros((dz + mu.size, dz + mu.size))
        full[:dz, :dz] = Sigma
        full[dz:, dz:] = check_psd(C, "label covariance") if mu.size else C
        out.append((float(w), np.concatenate([np.zeros(dz), mu]), full))
    return out


def gaussian_poly_moment(Sigma, poly: Poly, mixture: Sequence[LabelComponent] | None = None) -> float:
    """``E poly(Z, Y)`` with ``Z ~ N(0, Sigma)`` and ``Y`` drawn from ``mixture``.

    The first ``len(Sigma)`` variables of ``poly`` are ``Z``; the remaining
    ones (if any) are the label.
    """
    Sigma = check_psd(Sigma, "Sigma")
    if poly.degree > MAX_DEGREE:
        raise ParameterError(f"polynomial degree {poly.degree} exceeds {MAX_DEGREE}")
    total = 0.0
    for w, mean, cov in _joint_components(Sigma, mixture):
        if poly.nvars != mean.size:
            raise ShapeError(f"polynomial has {poly.nvars} variables, law has {mean.size}")
        total += w * _poly_expect(poly, mean, _Wick(cov))
    return total


def _gh_rule(mean: np.ndarray, cov: np.ndarray, nodes: int):
    """Points and weights integrating against ``N(mean, cov)`` (possibly degenerate)."""
    lam, V = np.linalg.eigh(cov)
    keep = lam > 1e-14 * max(1.0, lam.max(initial=0.0))
    r = int(keep.sum())
    if r == 0:
        return mean[None, :], np.ones(1)
    if r > MAX_QUAD_DIMS:
        raise NumericError(f"quadrature over {r} Gaussian dimensions is not supported")
    x, w = np.polynomial.hermite.hermgauss(nodes)
    x = np.sqrt(2.0) * x
    w = w / np.sqrt(np.pi)
    grids = np.meshgrid(*([x] * r), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(len(pts))
    for wg in np.meshgrid(*([w] * r), indexing="ij"):
        wts = wts * wg.ravel()
    L = V[:, keep] * np.sqrt(lam[keep])
    return mean + pts @ L.T, wts


@dataclass(frozen=True)
class ConvergingModel:
    """Limit description of a converging sequence.

    ``g(a, t)`` returns a ``PolyMap`` over ``q + q_label`` variables or a
    callable ``value(x, y) -> (..., q)`` acting on batches. ``labels[a]`` is
    the label law of class ``a`` (``None`` when there are no labels).
    """

    W: np.ndarray
    c: np.ndarray
    g: Callable
    q: int
    Sigma_hat0: tuple
    q_label: int = 0
    labels: tuple | None = None
    nodes: int = GH_NODES

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        k = c.size
        if W.shape != (k, k):
            raise ShapeError(f"W has shape {W.shape}, c has {k} classes")
        if not np.allclose(W, W.T) or np.any(W < 0):
            raise ParameterError("W must be symmetric with nonnegative entries")
        S0 = tuple(check_psd(np.reshape(S, (self.q, self.q)), "Sigma_hat0") for S in self.Sigma_hat0)
        if len(S0) != k:
            raise ShapeError(f"need {k} initial matrices, got {len(S0)}")
        if self.labels is not None and len(self.labels) != k:
            raise ShapeError(f"need {k} label laws, got {len(self.labels)}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "Sigma_hat0", S0)

    @property
    def k(self) -> int:
        return self.c.size

    def label_law(self, a: int):
        return None if self.labels is None else self.labels[a]

    def combine(self, hats: Sequence[np.ndarray]) -> list[np.ndarray]:
        """``sum_b c_b W_ab hats[b]`` for every class ``a``."""
        return [sum(self.c[b] * self.W[a, b] * hats[b] for b in range(self.k)) for a in range(self.k)]


def moment_matrix(maps: Sequence, Sigma, law=None, q: int = 1, q_label: int = 0,
                  nodes: int = GH_NODES) -> np.ndarray:
    """``E X X^T`` for ``X = [g_1(Z_1, Y), ..., g_k(Z_k, Y)]`` with ``(Z_1..Z_k) ~ N(0, Sigma)``.

    Each ``g`` is a ``PolyMap`` (exact) or a callable ``(x, y) -> (..., q)``
    (Gauss-Hermite quadrature); ``Y`` is drawn from ``law`` and shared.
    """
    nz = q * len(maps)
    Sigma = check_psd(Sigma, "Sigma")
    if Sigma.shape != (nz, nz):
        raise ShapeError(f"Sigma has shape {Sigma.shape}, expected {(nz, nz)}")
    if all(isinstance(m, PolyMap) for m in maps):
        nv = nz + q_label
        comps = []
        for k, m in enumerate(maps):
            pos = list(range(k * q, (k + 1) * q)) + list(range(nz, nz + q_label))
            comps += [p.embed(nv, pos) for p in m.components]
        wicks = [(w, mean, _Wick(cov)) for w, mean, cov in _joint_components(Sigma, law)]
        out = np.empty((nz, nz))
        for r in range(nz):
            for s in range(r, nz):
                prod = comps[r] * comps[s]
                if prod.degree > MAX_DEGREE:
                    raise NumericError(f"product degree {prod.degree} exceeds {MAX_DEGREE}")
                out[r, s] = out[s, r] = sum(w * _poly_expect(prod, mean, wk) for w, mean, wk in wicks)
        return out
    out = np.zeros((nz, nz))
    for w, mean, cov in _joint_components(Sigma, law):
        pts, wts = _gh_rule(mean, cov, nodes)
        y = pts[:, nz:] if q_label else None
        vals = []
        for k, m in enumerate(maps):
            x = pts[:, k * q:(k + 1) * q]
            vals.append(m.evaluate(x, y) if isinstance(m, PolyMap) else np.asarray(m(x, y), dtype=float))
        X = np.concatenate(vals, axis=-1)
        if not np.all(np.isfinite(X)):
            raise NumericError("non-finite map values in quadrature")
        out += w * (X * wts[:, None]).T @ X
    return 0.5 * (out + out.T)


def _second_moment(model: ConvergingModel, a: int, Sigma: np.ndarray, times: Sequence[int]) -> np.ndarray:
    return moment_matrix([model.g(a, t) for t in times], Sigma, model.label_law(a),
                         model.q, model.q_label, model.nodes)


@dataclass(frozen=True)
class SeState:
    """``Sigma[a]`` is ``Sigma^t_a`` (``None`` at t = 0); ``Sigma_hat[a]`` is ``Sigma_hat^t_a``."""

    t: int
    Sigma: tuple | None
    Sigma_hat: tuple

    @classmethod
    def initial(cls, model: ConvergingModel) -> SeState:
        return cls(0, None, model.Sigma_hat0)


def se_step(state: SeState, model: ConvergingModel) -> SeState:
    t = state.t + 1
    try:
        Sigma = tuple(check_psd(S, f"Sigma^{t}") for S in model.combine(state.Sigma_hat))
        hats = tuple(check_psd(_second_moment(model, a, Sigma[a], (t,)), f"Sigma_hat^{t}")
                     for a in range(model.k))
    except DomainError as exc:
        raise NumericError(str(exc)) from exc
    return SeState(t, Sigma, hats)


@dataclass
class SeTrajectory:
    states: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, t: int) -> SeState:
        return self.states[t]

    def csv_rows(self) -> list[dict]:
        rows = []
        for st in self.states:
            for a, hat in enumerate(st.Sigma_hat):
                for r in range(hat.shape[0]):
                    for s in range(hat.shape[1]):
                        sig = "" if st.Sigma is None else repr(float(st.Sigma[a][r, s]))
                        rows.append({"t": st.t, "class": a, "row": r, "col": s,
                                     "sigma_value": sig, "sigma_hat_value": repr(float(hat[r, s]))})
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SE_CSV_FIELDS)
            w.writeheader()
            w.writerows(self.csv_rows())


SE_CSV_FIELDS = ("t", "class", "row", "col", "sigma_value", "sigma_hat_value")


def se_run(model: ConvergingModel, T: int, boundary: SeState | None = None) -> SeTrajectory:
    """Iterate ``se_step`` ``T`` times; on failure the error carries the partial trajectory."""
    if T < 0:
        raise ParameterError(f"T must be nonnegative, got {T}")
    traj = SeTrajectory([boundary or SeState.initial(model)])
    for _ in range(T):
        try:
            traj.states.append(se_step(traj.states[-1], model))
        except NumericError as exc:
            raise NumericError(str(exc), partial=traj) from exc
    return traj


@dataclass(frozen=True)
class TwoTimeSeState:
    """``Sigma_ts[a]`` is ``Sigma^{t,s}_a`` (``None`` on the boundary)."""

    t: int
    s: int
    Sigma_ts: tuple | None
    Sigma_hat_ts: tuple


def two_time_boundary(model: ConvergingModel, traj: SeTrajectory, t: int, s: int) -> TwoTimeSeState:
    """Boundary ``Sigma_hat^{t,s}`` with ``min(t, s) = 0`` built from a single-time trajectory."""
    if min(t, s) != 0:
        raise ParameterError("boundary needs t = 0 or s = 0")
    q = model.q
    hats = []
    for a in range(model.k):
        H0 = model.Sigma_hat0[a]
        M = np.zeros((2 * q, 2 * q))
        if t == 0 and s == 0:
            M[:] = np.block([[H0, H0], [H0, H0]])
        else:
            M[:q, :q] = traj[t].Sigma_hat[a]
            M[q:, q:] = traj[s].Sigma_hat[a]
        hats.append(M)
    return TwoTimeSeState(t, s, None, tuple(hats))


def se_two_time_step(state: TwoTimeSeState, model: ConvergingModel) -> TwoTimeSeState:
    """``(t, s) -> (t + 1, s + 1)``."""
    t, s = state.t + 1, state.s + 1
    try:
        Sigma = tuple(check_psd(S, f"Sigma^{{{t},{s}}}") for S in model.combine(state.Sigma_hat_ts))
        hats = tuple(check_psd(_second_moment(model, a, Sigma[a], (t, s)), f"Sigma_hat^{{{t},{s}}}")
                     for a in range(model.k))
    except DomainError as exc:
        raise NumericError(str(exc)) from exc
    return TwoTimeSeState(t, s, Sigma, hats)


def se_two_time_table(model: ConvergingModel, T: int) -> dict[tuple[int, int], TwoTimeSeState]:
    """All ``Sigma^{t,s}`` with ``1 <= s <= t <= T`` keyed by ``(t, s)``."""
    traj = se_run(model, T)
    out = {}
    for lag in range(T):
        state = two_time_boundary(model, traj, lag, 0)
        for _ in range(T - lag):
            state = se_two_time_step(state, model)
            out[(state.t, state.s)] = state
    return out
