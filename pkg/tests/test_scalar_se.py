import math

import numpy as np
import pytest
from scipy import integrate

from ampuniv.cs_amp import scalar_se_step, se_sigmas, two_time_table
from ampuniv.ensembles import SignalSpec, sample_signal
from ampuniv.errors import ParameterError
from ampuniv.phase_boundary import G, alpha_star
from ampuniv.scalar_se import (F, eta_moments, joint_error, mean_abs_eta, mean_abs_signal, mse, prob_above,
                               se_map, se_trajectory, second_moment, soft_threshold)

MIXTURES = {
    "bernoulli_gaussian": SignalSpec(0.3, "unit_gaussian").components(),
    "signed_unit": SignalSpec(0.3, "signed_unit").components(),
    "shifted": [(0.5, 0.7, 0.4), (0.3, -1.2, 2.0), (0.2, 0.0, 0.0)],
}


def test_soft_threshold_examples():
    assert soft_threshold(2.0, 0.5) == 1.5
    assert soft_threshold(-0.3, 0.5) == 0.0
    u = np.linspace(-3, 3, 13)
    assert np.array_equal(soft_threshold(u, 0.0), u)
    with pytest.raises(ParameterError):
        soft_threshold(1.0, -0.1)


def _pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def _quad_expect(fn, comps, sigma_sq, kinks):
    """``E fn(X, X + sigma Z)`` by nested adaptive quadrature (independent of the closed forms)."""
    s = math.sqrt(sigma_sq)

    def given_x(x):
        pts = sorted((k - x) / s for k in kinks if abs((k - x) / s) < 12)
        return integrate.quad(lambda z: fn(x, x + s * z) * _pdf(z), -12, 12, points=pts or None, epsabs=1e-13,
                              limit=200)[0]

    total = 0.0
    for w, mu, tau2 in comps:
        if tau2 == 0:
            total += w * given_x(mu)
        else:
            tau = math.sqrt(tau2)
            total += w * integrate.quad(lambda x: given_x(mu + tau * x) * _pdf(x), -10, 10, epsabs=1e-11,
                                        limit=200)[0]
    return total


@pytest.mark.parametrize("name", sorted(MIXTURES))
@pytest.mark.parametrize("sigma_sq,theta", [(0.2, 0.4), (1.5, 1.1)])
def test_closed_forms_against_quadrature(name, sigma_sq, theta):
    comps = MIXTURES[name]
    eta = lambda u: soft_threshold(u, theta)
    kinks = (-theta, theta)
    assert mse(sigma_sq, theta, comps) == pytest.approx(
        _quad_expect(lambda x, u: (eta(u) - x) ** 2, comps, sigma_sq, kinks), abs=1e-8)
    assert prob_above(sigma_sq, theta, comps) == pytest.approx(
        _quad_expect(lambda x, u: float(abs(u) > theta), comps, sigma_sq, kinks), abs=1e-8)
    assert mean_abs_eta(sigma_sq, theta, comps) == pytest.approx(
        _quad_expect(lambda x, u: abs(eta(u)), comps, sigma_sq, kinks), abs=1e-8)


def test_eta_moment_components():
    P, e1, e2, ea = eta_moments(0.4, 0.9, 0.7)
    u = np.random.default_rng(1).normal(0.4, math.sqrt(0.9), 4 * 10 ** 6)
    eta = soft_threshold(u, 0.7)
    for exact, sample in ((P, np.abs(u) > 0.7), (e1, eta), (e2, eta ** 2), (ea, np.abs(eta))):
        assert abs(exact - sample.mean()) < 4 * sample.std() / math.sqrt(u.size)


def test_signal_moments():
    comps = MIXTURES["shifted"]
    x = np.concatenate([np.random.default_rng(k).normal(mu, math.sqrt(t2), int(w * 2 * 10 ** 6))
                        for k, (w, mu, t2) in enumerate(comps)])
    assert second_moment(comps) == pytest.approx(np.mean(x ** 2), rel=5e-3)
    assert mean_abs_signal(comps) == pytest.approx(np.mean(np.abs(x)), rel=5e-3)


def test_map_at_zero_and_slope():
    eps, delta = 0.1, 0.5
    a = alpha_star(eps)
    for law in ("unit_gaussian", "signed_unit"):
        comps = SignalSpec(eps, law).components()
        assert F(0.0, 0.0, delta, comps) == 0.0
        # Gaussian nonzeros add an O(sigma) correction to the ratio, so probe sigma^2 <= 1e-14
        for s2 in (1e-14, 1e-20, 1e-30):
            assert se_map(s2, a, delta, comps) / s2 == pytest.approx(G(eps, a) / delta, rel=1e-6)


def test_map_monte_carlo_ten_million():
    eps, delta = 0.1, 0.5
    sig = SignalSpec(eps)
    a = alpha_star(eps)
    n = 10 ** 7
    x = sample_signal(sig, n, 41)
    z = np.random.default_rng(42).standard_normal(n)
    err = (soft_threshold(x + z, a) - x) ** 2 / delta
    assert abs(err.mean() - scalar_se_step(1.0, a, delta, sig)) < 3 * err.std() / math.sqrt(n)


def test_map_monotone_and_concave():
    comps = SignalSpec(0.2).components()
    a, delta = alpha_star(0.2), 0.6
    grid = np.linspace(0, 4, 201)
    vals = np.array([se_map(s2, a, delta, comps) for s2 in grid])
    assert np.all(np.diff(vals) > 0)
    assert np.all(np.diff(vals, 2) <= 1e-12)


def test_subcritical_geometric_rate():
    eps, delta = 0.1, 0.5
    a = alpha_star(eps)
    traj = se_trajectory(a, delta, SignalSpec(eps).components(), 120)
    t = np.arange(60, 121)
    slope = np.polyfit(t, np.log(traj[60:121]), 1)[0]
    assert abs(math.exp(slope) - G(eps, a) / delta) < 1e-3


def test_se_sigmas_are_square_roots():
    sig = SignalSpec(0.1)
    assert np.allclose(se_sigmas(1.5, 0.5, sig, 5) ** 2, se_trajectory(1.5, 0.5, sig.components(), 5))
    assert se_sigmas(1.5, 0.5, sig, 0)[0] ** 2 == pytest.approx(0.1 / 0.5)


def test_negative_sigma_rejected():
    with pytest.raises(ParameterError):
        F(-1e-3, 0.1, 0.5, MIXTURES["signed_unit"])


@pytest.mark.parametrize("mu,tau2,theta_s,theta_t", [(0.3, 0.5, 0.4, 0.7), (1.0, 0.0, 0.2, 0.9), (-0.4, 2.0, 1.1, 0.3)])
def test_joint_error_monte_carlo(mu, tau2, theta_s, theta_t):
    R = np.array([[0.8, 0.5], [0.5, 0.6]])
    n = 4 * 10 ** 6
    rng = np.random.default_rng(43)
    x = rng.normal(mu, math.sqrt(tau2), n)
    z = rng.multivariate_normal([0, 0], R, n)
    prod = (soft_threshold(x + z[:, 0], theta_s) - x) * (soft_threshold(x + z[:, 1], theta_t) - x)
    exact = joint_error(mu, tau2, R[0, 0], R[1, 1], R[0, 1], theta_s, theta_t)
    assert abs(prod.mean() - exact) < 4 * prod.std() / math.sqrt(n)


def test_joint_error_tiny_noise_keeps_relative_accuracy():
    # at noise 1e-12 the error product is ~1e-12; compare to the perfectly correlated limit
    mu, tau2, r, th = 0.0, 1.0, 1e-12, 1e-6
    same = joint_error(mu, tau2, r, r, r, th, th)
    assert same == pytest.approx(mse(r, th, [(1.0, mu, tau2)]), rel=1e-7)


def test_two_time_table_structure():
    sig = SignalSpec(0.1)
    a = alpha_star(0.1)
    R = two_time_table(a, 0.5, sig, 8)
    assert np.array_equal(R, R.T)
    assert np.allclose(np.diag(R), se_trajectory(a, 0.5, sig.components(), 8), rtol=0, atol=1e-10)
    assert R[0, 0] == pytest.approx(0.1 / 0.5)
    assert np.all(np.linalg.eigvalsh(R) > -1e-10)
    with pytest.raises(ParameterError):
        two_time_table(a, 0.5, sig, 201)


def test_successive_noise_correlation_increases_toward_one():
    sig = SignalSpec(0.1)
    R = two_time_table(alpha_star(0.1), 0.5, sig, 30)
    Q = np.array([R[t, t - 1] / math.sqrt(R[t, t] * R[t - 1, t - 1]) for t in range(2, 31)])
    assert np.all(np.diff(Q) > 0)
    # the approach is slow: Q is about 0.965 at t = 20 and crosses 0.99 only near t = 40
    assert 0.96 < Q[18] < 0.97 and Q[-1] > 0.98


def test_zero_signal_table_collapses():
    R = two_time_table(1.2, 0.5, SignalSpec(0.0), 5)
    assert np.all(R[1:, 1:] == 0)


def test_two_time_entry_monte_carlo():
    # R[s+1, t+1] = E[(eta(X + Z_s) - X)(eta(X + Z_t) - X)] / delta with (Z_s, Z_t) ~ N(0, R[s:t])
    sig = SignalSpec(0.2)
    a, delta = 1.3, 0.5
    R = two_time_table(a, delta, sig, 4)
    s, t = 1, 3
    cov = [[R[s, s], R[s, t]], [R[s, t], R[t, t]]]
    n = 4 * 10 ** 6
    x = sample_signal(sig, n, 44)
    z = np.random.default_rng(45).multivariate_normal([0, 0], cov, n)
    es = soft_threshold(x + z[:, 0], a * math.sqrt(R[s, s])) - x
    et = soft_threshold(x + z[:, 1], a * math.sqrt(R[t, t])) - x
    prod = es * et / delta
    assert abs(prod.mean() - R[s + 1, t + 1]) < 4 * prod.std() / math.sqrt(n)


def test_joint_error_without_thresholds_is_noise_covariance():
    # eta(u; 0) = u, so the error product is Z_s Z_t
    assert joint_error(0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0) == pytest.approx(0.0, abs=1e-14)
    assert joint_error(0.4, 0.5, 0.9, 0.6, 0.3, 0.0, 0.0) == pytest.approx(0.3, abs=1e-12)
