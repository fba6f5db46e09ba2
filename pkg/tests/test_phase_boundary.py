import json
import math
from pathlib import Path

import numpy as np
import pytest

from ampuniv.ensembles import SignalSpec, sample_signal
from ampuniv.errors import DomainError, ParameterError
from ampuniv.phase_boundary import (G, G1, G2, Phi_neg, alpha_0, alpha_interval, alpha_min, alpha_star,
                                    critical_quantities, delta_star, f_delta, f_delta_inverse, f_rho,
                                    fixed_point_sigma, phase_curve, rate, rho_star, write_phase_curve)
from ampuniv.scalar_se import prob_above, se_map, soft_threshold

ORACLE = json.loads((Path(__file__).with_name("data") / "oracle_values.json").read_text())


@pytest.mark.parametrize("delta", sorted(ORACLE["rho_star"]))
def test_rho_star_matches_high_precision(delta):
    assert abs(rho_star(float(delta)) - float(ORACLE["rho_star"][delta])) <= 1e-8


@pytest.mark.parametrize("eps", sorted(ORACLE["alpha_star"]))
def test_alpha_and_delta_star_match_high_precision(eps):
    e = float(eps)
    assert abs(alpha_star(e) - float(ORACLE["alpha_star"][eps])) <= 1e-10
    assert abs(delta_star(e) - float(ORACLE["delta_star"][eps])) <= 1e-10


@pytest.mark.parametrize("eps", [0.01, 0.2, 0.5, 0.9])
def test_G_at_zero_is_one(eps):
    assert G(eps, 0.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.3, 0.6])
def test_minimum_value_identity_and_stationarity(eps):
    a = alpha_star(eps)
    assert abs(G1(eps, a)) <= 1e-12
    assert abs(G(eps, a) - (eps + 2 * (1 - eps) * Phi_neg(a))) <= 1e-10
    assert abs(G(eps, a) - G2(eps, a) / 2) <= 1e-10


def test_derivatives_match_finite_differences():
    h = 1e-5
    for eps in (0.05, 0.3, 0.7):
        for a in np.linspace(0.1, 4.0, 12):
            fd1 = (G(eps, a + h) - G(eps, a - h)) / (2 * h)
            fd2 = (G1(eps, a + h) - G1(eps, a - h)) / (2 * h)
            assert abs(fd1 - G1(eps, a)) < 1e-6 and abs(fd2 - G2(eps, a)) < 1e-6


def test_alpha_star_decreasing_and_bracketed():
    eps = np.linspace(0.01, 0.95, 40)
    a = np.array([alpha_star(e) for e in eps])
    assert np.all(np.diff(a) < 0)
    assert np.all((a > 1e-4) & (a < 20))


def test_delta_star_between_epsilon_and_one_and_increasing():
    eps = np.linspace(0.01, 0.95, 40)
    d = np.array([delta_star(e) for e in eps])
    assert np.all(d > eps) and np.all(d < 1)
    assert np.all(np.diff(d) > 0)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2, 0.4])
def test_two_parametrizations_agree(eps):
    d = delta_star(eps)
    assert abs(rho_star(d) - eps / d) <= 1e-8


def test_boundary_limits():
    assert f_delta(0.0) == pytest.approx(1.0) and f_rho(0.0) == 1.0
    near_one = [f_delta_inverse(1 - 10.0 ** -k) for k in (2, 4, 6)]
    assert np.all(np.diff(near_one) < 0) and near_one[-1] < 2e-3
    assert rho_star(0.999999) > 0.99
    assert np.all(np.diff([rho_star(d) for d in np.linspace(0.05, 0.95, 19)]) > 0)


def test_domain_errors():
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(DomainError):
            rho_star(bad)
        with pytest.raises(DomainError):
            alpha_star(bad)
    with pytest.raises(DomainError):
        alpha_interval(0.3, 0.2)
    with pytest.raises(ParameterError):
        fixed_point_sigma(-1.0, 0.5, SignalSpec(0.1))


def test_alpha_interval_brackets_subcritical_region():
    eps, delta = 0.1, 0.5
    a1, a2 = alpha_interval(eps, delta)
    assert a1 < alpha_star(eps) < a2
    assert abs(G(eps, a1) - delta) < 1e-10 and abs(G(eps, a2) - delta) < 1e-10
    assert rate(eps, 0.5 * (a1 + a2), delta) < 1


def test_alpha_min_slope_is_one():
    for delta in (0.2, 0.5, 0.8):
        a = alpha_min(delta)
        # large-noise slope of the SE map equals G_0(alpha) / delta
        assert abs(G(0.0, a) / delta - 1) < 1e-10


def test_subcritical_fixed_point():
    fp = fixed_point_sigma(alpha_star(0.1), 0.5, SignalSpec(0.1))
    assert fp.subcritical and fp.sigma_sq == 0.0


def test_supercritical_fixed_point_residual():
    sig = SignalSpec(0.27)
    fp = fixed_point_sigma(alpha_star(0.27), 0.3, sig)
    assert not fp.subcritical and fp.sigma_sq > 0
    assert fp.residual <= 1e-12
    assert abs(se_map(fp.sigma_sq, alpha_star(0.27), 0.3, sig.components()) - fp.sigma_sq) <= 1e-12


def test_fixed_point_by_monte_carlo():
    sig = SignalSpec(0.27)
    alpha, delta = alpha_star(0.27), 0.3
    s2 = fixed_point_sigma(alpha, delta, sig).sigma_sq
    n = 4 * 10 ** 6
    x = sample_signal(sig, n, 31)
    z = np.random.default_rng(32).standard_normal(n)
    err = (soft_threshold(x + math.sqrt(s2) * z, alpha * math.sqrt(s2)) - x) ** 2 / delta
    assert abs(err.mean() - s2) < 3 * err.std() / math.sqrt(n)


def test_alpha_0_defining_identity():
    sig = SignalSpec(0.27)
    delta = 0.3
    a0 = alpha_0(delta, sig)
    assert a0 > alpha_min(delta)
    s2 = fixed_point_sigma(a0, delta, sig).sigma_sq
    assert abs(prob_above(s2, a0 * math.sqrt(s2), sig.components()) - delta) <= 1e-8
    with pytest.raises(DomainError):
        alpha_0(0.5, SignalSpec(0.1))


def test_critical_quantities_bundle():
    cq = critical_quantities(0.1, 0.5)
    assert cq.alpha == cq.alpha_star and cq.delta_star == pytest.approx(delta_star(0.1))
    assert cq.omega < 1 and cq.sigma_star_sq == 0.0


def test_phase_curve_rows(tmp_path):
    rows = phase_curve([0.25, 0.5])
    assert float(rows[1]["rho_star"]) == rho_star(0.5)
    assert len(phase_curve()) == 99
    path = tmp_path / "curve.csv"
    write_phase_curve(path, [0.5])
    lines = path.read_text().splitlines()
    assert lines[0] == "delta,rho_star,alpha" and len(lines) == 2
