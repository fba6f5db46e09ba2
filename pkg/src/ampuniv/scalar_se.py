"""Scalar state evolution for soft-thresholding AMP.

The signal is a finite mixture of Gaussian components ``(weight, mean, var)``
(an atom is a component with zero variance), as produced by
``SignalSpec.components()``. For one component ``X ~ N(mu, tau^2)`` and
``U = X + sigma Z`` we have ``U ~ N(mu, v)`` with ``v = tau^2 + sigma^2`` and

    E (U - theta)_+   = (mu - theta) Phi(a) + s phi(a)
    E (U - theta)_+^2 = ((mu - theta)^2 + v) Phi(a) + (mu - theta) s phi(a)

where ``s = sqrt(v)`` and ``a = (mu - theta) / s``; the left tail is the same
with ``mu -> -mu``. Gaussian regression of ``X`` on ``U`` gives
``E[X eta(U)] = mu E eta(U) + tau^2 P(|U| > theta)``.

The mean squared error is not assembled from these moments, since
``E eta^2 - 2 E X eta + E X^2`` cancels to ``O(sigma^2)`` from ``O(1)`` terms.
It conditions on ``U`` instead (``_component_mse``), which keeps full relative
precision as ``sigma -> 0``.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammainc, gammaincc, ndtr

from .errors import NumericError, ParameterError

Components = Sequence[tuple[float, float, float]]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def soft_threshold(u, theta):
    """``eta(u; theta) = sign(u) max(|u| - theta, 0)``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ParameterError("threshold must be nonnegative")
    u = np.asarray(u, dtype=float)
    out = np.sign(u) * np.maximum(np.abs(u) - theta, 0.0)
    return float(out) if out.ndim == 0 else out


def _phi(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _tail_moments(mu: float, v: float, theta: float) -> tuple[float, float, float]:
    """``(P(U > theta), E (U - theta)_+, E (U - theta)_+^2)`` for ``U ~ N(mu, v)``."""
    d = mu - theta
    if v <= 0.0:
        if d > 0:
            return 1.0, d, d * d
        return 0.0, 0.0, 0.0
    s = math.sqrt(v)
    a = d / s
    P, p = float(ndtr(a)), _phi(a)
    return P, d * P + s * p, (d * d + v) * P + d * s * p


def eta_moments(mu: float, v: float, theta: float) -> tuple[float, float, float, float]:
    """``(P(|U| > theta), E eta, E eta^2, E |eta|)`` for ``U ~ N(mu, v)``."""
    Pr, m1r, m2r = _tail_moments(mu, v, theta)
    Pl, m1l, m2l = _tail_moments(-mu, v, theta)
    return Pr + Pl, m1r - m1l, m2r + m2l, m1r + m1l


def _interval_moments(mu: float, s: float, lo: float, hi: float) -> tuple[float, float, float]:
    """``(P, E[D; .], E[D^2; .])`` for ``D = U - mu`` restricted to ``lo < U < hi``, ``U ~ N(mu, s^2)``."""
    a, b = (lo - mu) / s, (hi - mu) / s
    pa = 0.0 if math.isinf(a) else _phi(a)
    pb = 0.0 if math.isinf(b) else _phi(b)
    return _std_moment(0.5, a, b), s * (pa - pb), s * s * _std_moment(1.5, a, b)


def _std_moment(k: float, a: float, b: float) -> float:
    """``int_a^b |x|^(2k - 1) phi(x) dx`` for ``k`` in {1/2, 3/2}, via incomplete gamma functions.

    Half-line pieces ``int_0^x`` are ``gammainc(k, x^2 / 2) / 2``; tails use the
    complement so that short intervals and far tails keep full relative precision.
    """
    if a < 0 < b:
        return 0.5 * float(gammainc(k, 0.5 * a * a) + gammainc(k, 0.5 * b * b))
    lo, hi = (a, b) if a >= 0 else (-b, -a)
    x, y = 0.5 * lo * lo, 0.5 * hi * hi
    if lo > 1.0:
        return 0.5 * (float(gammaincc(k, x)) - float(gammaincc(k, y)))
    return 0.5 * (float(gammainc(k, y)) - float(gammainc(k, x)))


def _component_mse(mu: float, tau2: float, sigma_sq: float, theta: float) -> float:
    """``E [eta(X + sigma Z; theta) - X]^2`` for ``X ~ N(mu, tau2)``.

    Conditions on ``U = X + sigma Z`` so that every term is of the size of the
    result: with ``D = U - mu``, ``v = tau2 + sigma^2`` and ``c = sigma^2 / v``
    the error is ``(c D -+ theta)^2`` plus the conditional variance
    ``tau2 sigma^2 / v`` outside the threshold, and ``X^2`` inside it.
    """
    v = tau2 + sigma_sq
    if v <= 0.0:
        return (soft_threshold(mu, theta) - mu) ** 2
    s = math.sqrt(v)
    c, cvar = sigma_sq / v, tau2 * sigma_sq / v
    total = 0.0
    for sign, lo, hi in ((1.0, theta, math.inf), (-1.0, -math.inf, -theta)):
        P, M1, M2 = _interval_moments(mu, s, lo, hi)
        total += c * c * M2 - 2.0 * sign * theta * c * M1 + (theta * theta + cvar) * P
    P, M1, M2 = _interval_moments(mu, s, -theta, theta)
    if tau2 <= 0.0:
        return total + mu * mu * P
    # E[X | U] = k0 + k1 U with k0 = sigma^2 mu / v, k1 = tau2 / v
    k0, k1 = sigma_sq * mu / v, tau2 / v
    EU, EU2 = mu * P + M1, mu * mu * P + 2.0 * mu * M1 + M2
    return total + cvar * P + k0 * k0 * P + 2.0 * k0 * k1 * EU + k1 * k1 * EU2


def mse(sigma_sq: float, theta: float, comps: Components) -> float:
    """``E [eta(X + sigma Z; theta) - X]^2``."""
    total = sum(w * _component_mse(mu, tau2, sigma_sq, theta) for w, mu, tau2 in comps)
    return max(total, 0.0)


def prob_above(sigma_sq: float, theta: float, comps: Components) -> float:
    """``P(|X + sigma Z| > theta)``."""
    return sum(w * eta_moments(mu, tau2 + sigma_sq, theta)[0] for w, mu, tau2 in comps)


def mean_abs_eta(sigma_sq: float, theta: float, comps: Components) -> float:
    """``E |eta(X + sigma Z; theta)|``."""
    return sum(w * eta_moments(mu, tau2 + sigma_sq, theta)[3] for w, mu, tau2 in comps)


def mean_abs_signal(comps: Components) -> float:
    total = 0.0
    for w, mu, tau2 in comps:
        if tau2 <= 0:
            total += w * abs(mu)
        else:
            tau = math.sqrt(tau2)
            total += w * (2 * tau * _phi(mu / tau) + mu * (1 - 2 * float(ndtr(-mu / tau))))
    return total


def second_moment(comps: Components) -> float:
    return sum(w * (mu * mu + tau2) for w, mu, tau2 in comps)


def F(sigma_sq: float, theta: float, delta: float, comps: Components) -> float:
    """``(1/delta) E [eta(X + sigma Z; theta) - X]^2``."""
    if sigma_sq < 0:
        raise ParameterError(f"sigma^2 must be nonnegative, got {sigma_sq}")
    return mse(sigma_sq, theta, comps) / delta


def se_map(sigma_sq: float, alpha: float, delta: float, comps: Components) -> float:
    """One step ``sigma^2 -> F(sigma^2, alpha sigma)``."""
    return F(sigma_sq, alpha * math.sqrt(max(sigma_sq, 0.0)), delta, comps)


def se_trajectory(alpha: float, delta: float, comps: Components, T: int) -> np.ndarray:
    """``sigma_t^2`` for ``t = 0..T`` starting from ``E X^2 / delta``."""
    out = np.empty(T + 1)
    out[0] = second_moment(comps) / delta
    for t in range(T):
        out[t + 1] = se_map(out[t], alpha, delta, comps)
    return out


def _clip_moments(m: float, v: float, theta: float) -> tuple[float, float]:
    """``(E clip(U), P(|U| > theta))`` for ``U ~ N(m, v)`` and ``clip(u) = u - eta(u; theta)``.

    ``clip`` is bounded by ``theta``, so these stay accurate when ``theta`` is tiny.
    """
    if v <= 0.0:
        return float(np.clip(m, -theta, theta)), float(abs(m) > theta)
    s = math.sqrt(v)
    P_hi, _, _ = _interval_moments(m, s, theta, math.inf)
    P_lo, _, _ = _interval_moments(m, s, -math.inf, -theta)
    P_in, M1_in, _ = _interval_moments(m, s, -theta, theta)
    return theta * (P_hi - P_lo) + m * P_in + M1_in, P_hi + P_lo


def joint_error(mu: float, tau2: float, r_ss: float, r_tt: float, r_st: float,
                theta_s: float, theta_t: float) -> float:
    """``E [eta(U_s; theta_s) - X] [eta(U_t; theta_t) - X]`` for ``U = X + Z``, ``X ~ N(mu, tau2)``.

    ``(Z_s, Z_t)`` is centered Gaussian with covariance ``[[r_ss, r_st], [r_st, r_tt]]``.
    Given ``U_s = u`` the pair ``(X, U_t)`` is Gaussian, and with ``clip(u) = u - eta(u)``

        E[. | u] = (k_ss d - clip_s(u)) (k_st d - E clip_t(U_t)) - c_xt P(|U_t| > theta_t) + v_x

    where ``d = u - mu``, ``k_ss = r_ss / v_s``, ``k_st = r_st / v_s``, ``v_x = tau2 r_ss / v_s``
    and ``c_xt = tau2 (r_ss - r_st) / v_s`` (Stein's lemma for the cross term). Every factor
    is of the size of the noise, so the product is integrated over ``u`` without the
    cancellation that expanding the square would cause.
    """
    vs = tau2 + r_ss
    if vs <= 0.0:
        clip_t, _ = _clip_moments(mu, r_tt, theta_t)
        return -float(np.clip(mu, -theta_s, theta_s)) * -clip_t
    k_ss, k_st = r_ss / vs, r_st / vs
    v_x, c_xt = tau2 * r_ss / vs, tau2 * (r_ss - r_st) / vs
    # Var(U_t | U_s) = (tau2 (r_ss + r_tt - 2 r_st) + r_ss r_tt - r_st^2) / vs
    vc = max((tau2 * (r_ss + r_tt - 2.0 * r_st) + r_ss * r_tt - r_st * r_st) / vs, 0.0)
    slope = (tau2 + r_st) / vs
    ss = math.sqrt(vs)

    def integrand(u):
        d = u - mu
        clip_t, P_t = _clip_moments(mu + slope * d, vc, theta_t)
        clip_s = min(max(u, -theta_s), theta_s)
        val = (k_ss * d - clip_s) * (k_st * d - clip_t) - c_xt * P_t + v_x
        return val * _phi(d / ss) / ss

    # the conditional law of U_t switches between the clip regimes within sqrt(vc) of the
    # points where its mean is +-theta_t; these are much narrower than the density
    cuts = [mu + ss * k for k in (-40.0, -8.0, 0.0, 8.0, 40.0)] + [theta_s, -theta_s]
    if slope != 0.0:
        width = math.sqrt(vc) / abs(slope)
        for target in (theta_t, -theta_t):
            centre = mu + (target - mu) / slope
            cuts += [centre + k * width for k in (-8.0, -2.0, 0.0, 2.0, 8.0)]
    edges = sorted(c for c in set(cuts) if mu - 40 * ss <= c <= mu + 40 * ss)
    # |error_s error_t| <= (|Z_s| + theta_s)(|Z_t| + theta_t): a noise-sized absolute floor
    scale = (math.sqrt(r_ss) + theta_s) * (math.sqrt(r_tt) + theta_t)
    total = size = error = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, err = integrate.quad(integrand, a, b, epsabs=1e-16 * scale, epsrel=1e-12, limit=200)
        total, size, error = total + val, size + abs(val), error + err
    if not math.isfinite(total) or error > 1e-9 * size + 1e-13 * scale:
        raise NumericError(f"two-time quadrature did not converge (error estimate {error:.2e})")
    return total


def two_time_table(alpha: float, delta: float, comps: Components, T: int) -> np.ndarray:
    """Symmetric ``(T+1) x (T+1)`` table ``R[s, t]`` of noise covariances.

    ``R[t, t] = sigma_t^2``; row and column 0 pair with the all-zero start.
    """
    if T < 0 or T > 200:
        raise ParameterError(f"T must lie in [0, 200], got {T}")
    sig = se_trajectory(alpha, delta, comps, T)
    R = np.zeros((T + 1, T + 1))
    R[0, 0] = second_moment(comps) / delta
    theta = alpha * np.sqrt(sig)
    # R[0, t+1] = E[X (X - eta(X + Z_t))] / delta = E[X clip(X + Z_t)] / delta, and by Stein's
    # lemma E[X clip(U)] = mu E clip(U) + tau2 P(|U| <= theta)
    for t in range(T):
        val = 0.0
        for w, mu, tau2 in comps:
            clip, P_out = _clip_moments(mu, tau2 + sig[t], theta[t])
            val += w * (mu * clip + tau2 * (1.0 - P_out))
        R[0, t + 1] = R[t + 1, 0] = val / delta
    for t in range(1, T + 1):
        R[t, t] = sig[t]
    for s in range(T):
        for t in range(s + 1, T):
            val = sum(w * joint_error(mu, tau2, R[s, s], R[t, t], R[s, t], theta[s], theta[t])
                      for w, mu, tau2 in comps)
            R[s + 1, t + 1] = R[t + 1, s + 1] = val / delta
    return R
