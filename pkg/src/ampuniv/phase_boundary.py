"""The l1 phase boundary and the scalar quantities that govern thresholding AMP.

The boundary is given parametrically for ``alpha > 0`` by

    delta = f_delta(alpha) = 2 phi(alpha) / (alpha + 2 (phi(alpha) - alpha Phi(-alpha)))
    rho   = f_rho(alpha)   = 1 - alpha Phi(-alpha) / phi(alpha)

and equivalently, in ``(epsilon, delta)`` coordinates with ``epsilon = rho delta``,
by ``delta = min_alpha G_eps(alpha)`` where

    G_eps(alpha) = eps (1 + alpha^2) + 2 (1 - eps) [(1 + alpha^2) Phi(-alpha) - alpha phi(alpha)].

All tails use ``Phi(-alpha)`` directly (``scipy.special.ndtr``) to avoid
cancellation for large ``alpha``.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import ndtr

from . import scalar_se
from .ensembles import SignalSpec
from .errors import DomainError, NumericError, ParameterError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def phi(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def Phi_neg(x: float) -> float:
    """``Phi(-x)``."""
    return float(ndtr(-x))


def f_delta(alpha: float) -> float:
    p = phi(alpha)
    return 2.0 * p / (alpha + 2.0 * (p - alpha * Phi_neg(alpha)))


def f_delta_prime(alpha: float) -> float:
    p, P = phi(alpha), Phi_neg(alpha)
    D = alpha + 2.0 * (p - alpha * P)
    return (-2.0 * alpha * p * D - 2.0 * p * (1.0 - 2.0 * P)) / (D * D)


def f_rho(alpha: float) -> float:
    if alpha == 0:
        return 1.0
    # alpha Phi(-alpha) / phi(alpha) is alpha times the Mills ratio
    return 1.0 - alpha * Phi_neg(alpha) / phi(alpha)


def G(epsilon: float, alpha: float) -> float:
    P, p = Phi_neg(alpha), phi(alpha)
    a2 = 1.0 + alpha * alpha
    return epsilon * a2 + 2.0 * (1.0 - epsilon) * (a2 * P - alpha * p)


def G1(epsilon: float, alpha: float) -> float:
    return 2.0 * alpha * epsilon + 4.0 * (1.0 - epsilon) * (alpha * Phi_neg(alpha) - phi(alpha))


def G2(epsilon: float, alpha: float) -> float:
    return 2.0 * epsilon + 4.0 * (1.0 - epsilon) * Phi_neg(alpha)


def _check_unit(name: str, x: float) -> None:
    if not (0.0 < x < 1.0):
        raise DomainError(f"{name} must lie in (0, 1), got {x}")


def _bisect(fn: Callable[[float], float], lo: float, hi: float, width: float = 1e-10) -> tuple[float, float]:
    """Shrink a sign-change bracket of ``fn`` below ``width``."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo, lo
    if fhi == 0:
        return hi, hi
    if flo * fhi > 0:
        raise NumericError(f"no sign change on [{lo}, {hi}]")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0:
            return mid, mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo, hi


def _newton_polish(fn, dfn, lo: float, hi: float, steps: int = 5) -> float:
    """Up to ``steps`` Newton steps from the bracket midpoint; stays inside the bracket."""
    x = 0.5 * (lo + hi)
    best, fbest = x, abs(fn(x))
    for _ in range(steps):
        d = dfn(x)
        if d == 0:
            break
        nxt = x - fn(x) / d
        if not (lo - 1e-9 <= nxt <= hi + 1e-9):
            break  # overshoot: keep the bisection answer
        x = nxt
        fx = abs(fn(x))
        if fx < fbest:
            best, fbest = x, fx
        if fx == 0:
            break
    return best


def _upper_bracket(pred: Callable[[float], bool], start: float = 1.0, limit: float = 64.0) -> float:
    hi = start
    while not pred(hi):
        hi *= 2.0
        if hi > limit:
            raise NumericError("could not bracket the root")
    return hi


def f_delta_inverse(delta: float) -> float:
    _check_unit("delta", delta)
    hi = _upper_bracket(lambda a: f_delta(a) < delta)
    lo, hi = _bisect(lambda a: f_delta(a) - delta, 0.0, hi)
    return _newton_polish(lambda a: f_delta(a) - delta, f_delta_prime, lo, hi)


def rho_star(delta: float) -> float:
    """Critical undersampling ratio ``rho_*(delta) = f_rho(f_delta^{-1}(delta))``."""
    return f_rho(f_delta_inverse(delta))


def alpha_star(epsilon: float) -> float:
    """Unique minimizer of ``G_eps`` on ``(0, inf)``."""
    _check_unit("epsilon", epsilon)
    hi = _upper_bracket(lambda a: G1(epsilon, a) > 0)
    lo, hi = _bisect(lambda a: G1(epsilon, a), 0.0, hi)
    return _newton_polish(lambda a: G1(epsilon, a), lambda a: G2(epsilon, a), lo, hi)


def delta_star(epsilon: float) -> float:
    """``min_alpha G_eps(alpha)``: the critical ``delta`` at sparsity ``epsilon``."""
    return G(epsilon, alpha_star(epsilon))


def alpha_min(delta: float) -> float:
    """Smallest threshold multiplier for which the large-noise slope of the SE map is below 1."""
    _check_unit("delta", delta)

    def slope(a):
        return (2.0 / delta) * ((1.0 + a * a) * Phi_neg(a) - a * phi(a)) - 1.0

    hi = _upper_bracket(lambda a: slope(a) < 0)
    lo, hi = _bisect(slope, 0.0, hi, width=1e-14)
    return 0.5 * (lo + hi)


def alpha_interval(epsilon: float, delta: float) -> tuple[float, float]:
    """``(alpha_1, alpha_2)``: the interval on which ``G_eps(alpha) < delta``."""
    _check_unit("epsilon", epsilon)
    _check_unit("delta", delta)
    a_star = alpha_star(epsilon)
    if G(epsilon, a_star) >= delta:
        raise DomainError(f"G_eps(alpha) < delta is empty: delta={delta} is at or below delta_*({epsilon})")
    fn = lambda a: G(epsilon, a) - delta  # noqa: E731
    a1 = 0.5 * sum(_bisect(fn, 0.0, a_star, width=1e-13))
    hi = _upper_bracket(lambda a: fn(a) > 0, start=2 * a_star + 1)
    a2 = 0.5 * sum(_bisect(fn, a_star, hi, width=1e-13))
    return a1, a2


def rate(epsilon: float, alpha: float, delta: float) -> float:
    """Slope of the SE map at zero, ``G_eps(alpha) / delta``."""
    return G(epsilon, alpha) / delta


@dataclass(frozen=True)
class FixedPoint:
    sigma_sq: float
    subcritical: bool
    residual: float


def fixed_point_sigma(alpha: float, delta: float, signal: SignalSpec) -> FixedPoint:
    """Limit of ``sigma_t^2`` under ``sigma^2 -> F(sigma^2, alpha sigma)``.

    Returns ``subcritical=True`` with ``sigma_sq = 0`` when zero is the only
    fixed point (slope at zero at most 1; the map is concave).
    """
    if alpha <= 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    _check_unit("delta", delta)
    comps = signal.components()
    if rate(signal.epsilon, alpha, delta) <= 1.0:
        return FixedPoint(0.0, True, 0.0)
    if alpha <= alpha_min(delta):
        raise DomainError(f"alpha={alpha} is at or below alpha_min({delta}); sigma_t^2 diverges")

    def h(s2):
        return scalar_se.se_map(s2, alpha, delta, comps) - s2

    x = scalar_se.second_moment(comps) / delta
    for _ in range(200):
        nxt = x + h(x)
        if abs(nxt - x) <= 1e-10 * max(x, 1.0):
            x = nxt
            break
        x = nxt
    lo, hi = x, x
    while h(lo) <= 0:
        lo *= 0.5
        if lo < 1e-300:
            raise NumericError("could not bracket the fixed point from below")
    while h(hi) >= 0:
        hi *= 2.0
        if hi > 1e300:
            raise NumericError("could not bracket the fixed point from above")
    root = optimize.brentq(h, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return FixedPoint(root, False, abs(h(root)))


def alpha_0(delta: float, signal: SignalSpec) -> float:
    """Threshold multiplier at which ``P(|X + sigma_* Z| >= alpha sigma_*) = delta``."""
    _check_unit("delta", delta)
    eps = signal.epsilon
    if not (0.0 < eps < 1.0) or delta >= delta_star(eps):
        raise DomainError(f"alpha_0 needs delta < delta_*(epsilon); got delta={delta}, epsilon={eps}")
    comps = signal.components()
    a_min = alpha_min(delta)

    def excess(a):
        s2 = fixed_point_sigma(a, delta, signal).sigma_sq
        return scalar_se.prob_above(s2, a * math.sqrt(s2), comps) - delta

    hi = _upper_bracket(lambda a: excess(a) < 0, start=a_min + 1.0, limit=a_min + 64.0)
    gap = hi - a_min
    lo = a_min + 0.5 * gap
    while excess(lo) <= 0:
        gap *= 0.5
        lo = a_min + gap
        if gap < 1e-12:
            raise NumericError("could not bracket alpha_0 from below")
    grid = np.linspace(lo, hi, 17)
    signs = np.sign([excess(a) for a in grid])
    if np.count_nonzero(np.diff(signs)) != 1:
        raise NumericError("probability curve crosses delta more than once on the search interval")
    return optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class CriticalQuantities:
    epsilon: float
    delta: float
    alpha: float
    alpha_star: float
    delta_star: float
    omega: float
    sigma_star_sq: float
    alpha_min: float


def critical_quantities(epsilon: float, delta: float, alpha: float | None = None,
                        signal: SignalSpec | None = None) -> CriticalQuantities:
    a_star = alpha_star(epsilon)
    alpha = a_star if alpha is None else alpha
    signal = signal or SignalSpec(epsilon)
    fp = fixed_point_sigma(alpha, delta, signal)
    return CriticalQuantities(epsilon, delta, alpha, a_star, G(epsilon, a_star),
                              rate(epsilon, alpha, delta), fp.sigma_sq, alpha_min(delta))


def default_delta_grid(points: int = 99) -> np.ndarray:
    return np.round(np.linspace(0.01, 0.99, points), 12)


PHASE_CURVE_FIELDS = ("delta", "rho_star", "alpha")


def phase_curve(deltas: Iterable[float] | None = None) -> list[dict]:
    rows = []
    for d in default_delta_grid() if deltas is None else deltas:
        a = f_delta_inverse(float(d))
        rows.append({"delta": repr(float(d)), "rho_star": repr(f_rho(a)), "alpha": repr(a)})
    return rows


def write_phase_curve(path, deltas: Iterable[float] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=PHASE_CURVE_FIELDS)
        w.writeheader()
        w.writerows(phase_curve(deltas))
